#include <stdio.h>
#include <string.h>
#include "qutrit_transfer.h"

static int fail(const char *what) {
    char msg[256];
    qst_last_error_message(msg, sizeof msg);
    fprintf(stderr, "%s: %s\n", what, msg);
    return 1;
}

int main(void) {
    QstConfig *cfg = NULL;
    QstTransfer *t = NULL;
    QstTransferSummary s;

    if (strlen(qst_version()) == 0) return fail("version");
    if (qst_config_from_str("kappa_inv_us = 10\n", &cfg) != QST_STATUS_OK) return fail("config");
    if (qst_config_set(cfg, "delta_GHz", "-1") != QST_STATUS_CONFIG) return fail("bad key accepted");
    if (qst_config_set(cfg, "gamma_phi_inv_us", "inf") != QST_STATUS_OK) return fail("set");
    if (qst_transfer_run(cfg, &t) != QST_STATUS_OK) return fail("run");
    if (qst_transfer_summary(t, &s) != QST_STATUS_OK) return fail("summary");
    printf("F=%.6f t1=%.3f t2=%.3f\n", s.fidelity, s.t1_ns, s.t2_ns);
    qst_transfer_free(t);
    qst_config_free(cfg);
    return (s.fidelity > 0.9 && s.fidelity <= 1.0) ? 0 : 1;
}
