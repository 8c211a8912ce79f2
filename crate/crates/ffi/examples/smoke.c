#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "fedkl.h"

int main(void) {
    const char *json =
        "{\"n_states\":2,\"n_actions\":2,\"gamma\":0.5,\"mu\":[1.0,0.0],"
        "\"reward\":[[0.0,0.0],[1.0,1.0]],"
        "\"transition\":[[[1.0,0.0],[0.0,1.0]],[[0.0,1.0],[1.0,0.0]]]}";
    FedklMdp *mdp = NULL;
    assert(fedkl_mdp_from_json(json, &mdp) == FEDKL_STATUS_OK);
    assert(fedkl_mdp_n_states(mdp) == 2);

    FedklPolicy *pi = NULL;
    assert(fedkl_policy_uniform(2, 2, &pi) == FEDKL_STATUS_OK);

    double eta = 0.0;
    assert(fedkl_expected_return(mdp, pi, &eta) == FEDKL_STATUS_OK);
    assert(fabs(eta - 0.5) < 1e-12);

    double rho[2];
    assert(fedkl_visitation(mdp, pi, rho) == FEDKL_STATUS_OK);
    assert(fabs(rho[0] - 1.5) < 1e-12 && fabs(rho[1] - 0.5) < 1e-12);

    FedklMdp *family[2] = {mdp, mdp};
    double weights[2] = {0.5, 0.5};
    FedklAgentReport agents[2];
    double beta = 0.0;
    assert(fedkl_heterogeneity_report((const FedklMdp *const *)family, weights, 2, pi,
                                      agents, &beta) == FEDKL_STATUS_OK);
    assert(agents[0].b_norm < 1e-12);

    int all_hold = 0;
    assert(fedkl_run_bound_sweep(3, 99, &all_hold) == FEDKL_STATUS_OK);
    assert(all_hold == 1);

    FedklMdp *bad = NULL;
    assert(fedkl_mdp_from_json("{\"oops\":1}", &bad) == FEDKL_STATUS_PARSE_ERROR);
    char msg[128];
    size_t len = fedkl_last_error_message(msg, sizeof msg);
    assert(len > 0);
    printf("expected parse error: %s\n", msg);

    fedkl_policy_free(pi);
    fedkl_mdp_free(mdp);
    printf("c smoke test ok\n");
    return 0;
}
