#include <stdio.h>
#include <string.h>

#include "camuv.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        return 2;
    }
    CamuvData *data = NULL;
    if (camuv_data_from_csv(argv[1], true, &data) != CAMUV_STATUS_OK) {
        fprintf(stderr, "%s\n", camuv_last_error_message());
        return 1;
    }
    CamuvConfig config = camuv_config_default();
    CamuvGraph *graph = NULL;
    if (camuv_discover(data, &config, &graph) != CAMUV_STATUS_OK) {
        fprintf(stderr, "%s\n", camuv_last_error_message());
        camuv_data_free(data);
        return 1;
    }
    size_t parents[8];
    for (size_t i = 0; i < camuv_graph_num_vars(graph); i++) {
        size_t len = 0;
        camuv_graph_parents(graph, i, parents, 8, &len);
        printf("%zu:", i);
        for (size_t k = 0; k < len; k++) {
            printf(" %zu", parents[k]);
        }
        printf("\n");
    }
    char *json = camuv_graph_to_json(graph);
    printf("%s\n", json);
    camuv_string_free(json);

    CamuvData *missing = NULL;
    CamuvStatus status = camuv_data_from_csv("/nonexistent/data.csv", true, &missing);
    printf("missing: %d %s\n", (int)status,
           strstr(camuv_last_error_message(), "nonexistent") ? "named" : "unnamed");

    camuv_graph_free(graph);
    camuv_data_free(data);
    return 0;
}
