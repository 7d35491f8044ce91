#include <stdio.h>
#include "thinfilm.h"

int main(void) {
    TfSimulation *sim = NULL;
    TfStatus st = tf_simulation_new("converge", "h = 0.25\nmoving = false", &sim);
    if (st != TF_STATUS_OK) {
        char msg[256];
        tf_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return (int)st;
    }
    st = tf_simulation_step(sim, 2);
    printf("t = %g\n", tf_simulation_time(sim));
    tf_simulation_free(sim);
    return (int)st;
}
