#include <stdio.h>
#include <string.h>

#include "wimax_qoe.h"

#define CHECK(cond)                                                        \
    do {                                                                   \
        if (!(cond)) {                                                     \
            const char *err = wimax_last_error();                          \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
                    err ? err : "no error");                               \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    WimaxConfig *cfg = wimax_config_default();
    CHECK(cfg != NULL);
    CHECK(wimax_config_user_count(cfg) == 5);
    CHECK(wimax_config_set_sim_time(cfg, 5.0) == WIMAX_STATUS_OK);
    CHECK(wimax_config_set_scheduler(cfg, WIMAX_SCHEDULER_BASELINE) == WIMAX_STATUS_OK);

    CHECK(wimax_config_set_threshold(cfg, 1.5) == WIMAX_STATUS_OUT_OF_RANGE);
    CHECK(strstr(wimax_last_error(), "threshold out of range") != NULL);

    WimaxRun *run = NULL;
    CHECK(wimax_run(cfg, &run) == WIMAX_STATUS_OK);
    CHECK(wimax_run_variant_count(run) == 1);
    CHECK(wimax_run_flow_count(run) == 5);

    WimaxFlowSummary s;
    CHECK(wimax_run_flow_summary(run, 0, 1, &s) == WIMAX_STATUS_OK);
    CHECK(s.flow_id == 2);
    CHECK(s.generated == 5000);
    CHECK(s.generated == s.delivered + s.dropped + s.in_queue);
    CHECK(s.threshold < 0.0);
    CHECK(wimax_run_flow_summary(run, 0, 9, &s) == WIMAX_STATUS_OUT_OF_RANGE);

    if (argc > 1) {
        CHECK(wimax_run_write_csv(run, argv[1]) == WIMAX_STATUS_OK);
    }
    wimax_run_free(run);

    double thresholds[2] = {0.1, 0.5};
    CHECK(wimax_config_set_thresholds(cfg, thresholds, 2) == WIMAX_STATUS_OK);
    CHECK(wimax_sweep(cfg, &run) == WIMAX_STATUS_OK);
    CHECK(wimax_run_variant_count(run) == 3);
    wimax_run_free(run);
    wimax_config_free(cfg);

    CHECK(wimax_config_parse("bogus = 1", &cfg) == WIMAX_STATUS_CONFIG_ERROR);
    CHECK(strstr(wimax_last_error(), "line 1") != NULL);

    CHECK(wimax_emission_interval_us(133333.0, 200) == 1500);
    CHECK(wimax_decide(200000.0, 150000.0, 200000.0, 0.5, 10, 6, 0.9, 7500.0) == 180000.0);

    puts("ok");
    return 0;
}
