#include <math.h>
#include <stdio.h>
#include <string.h>

#include "polyshift.h"

#define N 64

static int fail(const char *what, enum PsStatus st) {
    fprintf(stderr, "%s: status %d: %s\n", what, (int)st, ps_last_error_message());
    return 1;
}

int main(void) {
    size_t gens[] = {1, 2, 5};
    size_t degrees[] = {2};
    double coeffs[] = {6.75, -0.75, -1.0};
    PsGraph *g = NULL;
    PsFamily *f = NULL;
    PsFilter *h = NULL;
    enum PsStatus st;

    if ((st = ps_graph_circulant(N, gens, 3, &g)) != PS_STATUS_OK) return fail("graph", st);
    if ((st = ps_family_new(g, PS_SHIFT_KIND_LSYM, &f)) != PS_STATUS_OK) return fail("family", st);
    ps_graph_free(g);
    if ((st = ps_filter_new(degrees, 1, coeffs, 3, &h)) != PS_STATUS_OK) return fail("filter", st);

    double x[N], y[N], back[N];
    for (int i = 0; i < N; i++) x[i] = sin(0.37 * i);
    if ((st = ps_filter_apply(h, f, x, y, N)) != PS_STATUS_OK) return fail("apply", st);

    PsSolveOptions opts = {200, 1e-12};
    PsSolveInfo info;
    if ((st = ps_inverse_solve(h, f, PS_METHOD_IOPA, 2, y, back, N, &opts, &info)) != PS_STATUS_OK)
        return fail("inverse", st);
    double err = 0.0;
    for (int i = 0; i < N; i++) err = fmax(err, fabs(back[i] - x[i]));
    if (err > 1e-9) {
        fprintf(stderr, "round trip error %g\n", err);
        return 1;
    }

    st = ps_filter_apply(h, f, x, y, N - 1);
    if (st != PS_STATUS_DIMENSION_MISMATCH || strlen(ps_last_error_message()) == 0) return fail("mismatch", st);

    ps_filter_free(h);
    ps_family_free(f);
    printf("ok %zu iterations, error %.1e\n", info.iterations, err);
    return 0;
}
