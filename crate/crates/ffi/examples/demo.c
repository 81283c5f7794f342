/* Build: cargo build --release -p sgiga-ffi
 *        cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *           target/release/libsgiga_ffi.a -lm -lpthread -ldl -o demo */
#include <stdio.h>
#include "sgiga.h"

int main(void) {
    SgigaExperiment *exp = NULL;
    if (sgiga_experiment_new(SGIGA_EXAMPLE_CIRCLE, 10.0, 1.0, &exp) != SGIGA_STATUS_OK) {
        char msg[256];
        sgiga_last_error_message(msg, sizeof msg);
        fprintf(stderr, "error: %s\n", msg);
        return 1;
    }
    SgigaOptions opts = sgiga_default_options();
    for (size_t n = 5; n <= 20; n *= 2) {
        SgigaResult r;
        if (sgiga_solve(exp, SGIGA_METHOD_SGIGA2, n, &opts, &r) != SGIGA_STATUS_OK) {
            char msg[256];
            sgiga_last_error_message(msg, sizeof msg);
            fprintf(stderr, "N=%zu: %s\n", n, msg);
            sgiga_experiment_free(exp);
            return 1;
        }
        printf("N=%-3zu dofs=%-5zu L2=%.3e H1=%.3e SCN=%.3e\n", n, r.dofs, r.l2_error,
               r.h1_error, r.scn);
    }
    sgiga_experiment_free(exp);
    printf("sgiga %s\n", sgiga_version());
    return 0;
}
