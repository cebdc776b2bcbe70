/* Compiled as C to keep the public header C-clean. */
#include "impasse_lab.h"

#include <stdio.h>

int main(int argc, char** argv) {
    il_case* c = NULL;
    il_case_info info;
    if (argc < 2) {
        return 1;
    }
    if (il_case_load(argv[1], 1, &c) != IL_OK) {
        fprintf(stderr, "%s\n", il_last_error());
        return 1;
    }
    if (il_case_get_info(c, &info) != IL_OK || info.buses != 9) {
        il_case_free(c);
        return 1;
    }
    printf("impasse-lab %s: %d buses\n", il_version(), info.buses);
    il_case_free(c);
    return 0;
}
