#include <math.h>
#include <stdio.h>

#include "latmap.h"

#define CHECK(x)                                                              \
  do {                                                                        \
    LatmapStatus st_ = (x);                                                   \
    if (st_ != LATMAP_STATUS_OK) {                                            \
      fprintf(stderr, "%s: %d %s\n", #x, (int)st_, latmap_last_error());      \
      return 1;                                                               \
    }                                                                         \
  } while (0)

int main(void) {
  LatmapModel *target = NULL;
  LatmapInstance *inst = NULL;
  size_t pair[2] = {0, 1};
  size_t dims[4];
  double betas[3] = {0.2, 0.5, 1.0};
  double residual = -1.0;
  double lz = 0.0;

  CHECK(latmap_model_new_binary(2, &target));
  CHECK(latmap_model_add_parity(target, pair, 2, 0.9));
  CHECK(latmap_log_z(target, 0.5, &lz));
  if (fabs(lz - log(4.0 * cosh(0.45))) > 1e-12) return 2;

  CHECK(latmap_compile(target, LATMAP_BACKEND_LGT4D, LATMAP_MODE_DIRECT, &inst));
  CHECK(latmap_instance_dims(inst, dims));
  CHECK(latmap_verify(target, inst, betas, 3, 1e-9, &residual));
  if (residual > 1e-9) return 3;

  if (latmap_compile(target, LATMAP_BACKEND_LGT3D, LATMAP_MODE_DIRECT, &inst) != LATMAP_STATUS_UNSUPPORTED) return 4;
  if (latmap_last_error() == NULL) return 5;

  printf("dims %zu %zu %zu %zu\n", dims[0], dims[1], dims[2], dims[3]);
  latmap_instance_free(inst);
  latmap_model_free(target);
  return 0;
}
