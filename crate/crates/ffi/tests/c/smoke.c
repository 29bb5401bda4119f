#include <stdio.h>
#include <string.h>

#include "otddf.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        OtddfStatus s_ = (call);                                             \
        if (s_ != OTDDF_STATUS_OK) {                                         \
            char msg_[256];                                                  \
            otddf_last_error_message(msg_, sizeof msg_);                     \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, msg_);   \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    const char *model = "{\"kind\":\"lorenz63\"}";
    const char *config = "{\"window\":3,\"burn_in\":5,\"k_outer\":20,\"k_inner\":2,"
                         "\"batch_size\":16,\"f_width\":8,\"t_width\":8}";
    OtddfDataset *ds = NULL;
    OtddfMap *map = NULL;
    size_t j = 0, t_f = 0, n = 0, m = 0, w = 0;
    double window[9];
    double particles[3 * 64];

    CHECK(otddf_dataset_simulate(model, 100, 10, 42, &ds));
    CHECK(otddf_dataset_dims(ds, &j, &t_f, &n, &m));
    if (j != 100 || t_f != 10 || n != 3 || m != 1) {
        fprintf(stderr, "unexpected dims %zu %zu %zu %zu\n", j, t_f, n, m);
        return 1;
    }
    CHECK(otddf_map_train(ds, config, &map));
    CHECK(otddf_map_dims(map, NULL, NULL, &w, NULL));
    for (size_t k = 0; k < w; k++) {
        CHECK(otddf_dataset_observation(ds, 0, 6 + k, window + k * m, m));
    }
    CHECK(otddf_map_sample(map, window, w * m, 64, 1, particles, 3 * 64));
    if (otddf_map_sample(map, window, 2, 64, 1, particles, 3 * 64) != OTDDF_STATUS_INVALID_WINDOW) {
        fprintf(stderr, "short window accepted\n");
        return 1;
    }
    otddf_map_free(map);
    otddf_dataset_free(ds);
    printf("otddf %s ok: first particle %.3f %.3f %.3f\n", otddf_version(), particles[0], particles[1], particles[2]);
    return 0;
}
