#include <math.h>
#include <stdio.h>
#include <string.h>

#include "abrsim.h"

int main(int argc, char **argv) {
    if (abrsim_segment_to_cells(512) != 12) return 10;
    if (strlen(abrsim_version()) == 0) return 11;

    AbrsimConfig *cfg = NULL;
    if (abrsim_config_parse("bogus_key = 1\n", &cfg) != ABRSIM_STATUS_CONFIG_ERROR || cfg != NULL) return 12;
    char msg[256];
    if (abrsim_last_error(msg, sizeof msg) == 0 || strstr(msg, "bogus_key") == NULL) return 13;

    const char *text = "n_sources = 3\nlink_length_km = 100\nduration_s = 0.2\n";
    if (abrsim_config_parse(text, &cfg) != ABRSIM_STATUS_OK) return 14;
    if (fabs(abrsim_queue_control_factor(cfg, 0.0) - 1.05) > 1e-12) return 15;

    AbrsimMetrics *m = NULL;
    if (abrsim_run(cfg, &m) != ABRSIM_STATUS_OK) return 16;
    if (!(abrsim_metrics_goodput_mbps(m) > 0.0)) return 17;
    uint64_t q = 0;
    if (abrsim_metrics_max_source_queue(m, 2, &q) != ABRSIM_STATUS_OK) return 18;
    if (abrsim_metrics_max_source_queue(m, 3, &q) != ABRSIM_STATUS_OUT_OF_RANGE) return 19;
    if (argc > 1 && abrsim_metrics_write_csv(m, argv[1]) != ABRSIM_STATUS_OK) return 20;

    abrsim_metrics_free(m);
    abrsim_config_free(cfg);
    puts("ok");
    return 0;
}
