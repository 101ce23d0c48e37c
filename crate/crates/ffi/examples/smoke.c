#include <math.h>
#include <stdio.h>

#include "sgim.h"

int main(void) {
  SgimSound s;
  if (sgim_burst_sound(NULL, 0.0, 0.0, 0.5, 0.5, &s) != SGIM_STATUS_OK || s.f != 1.0) {
    fprintf(stderr, "burst sound: %s\n", sgim_last_error_message());
    return 1;
  }
  SgimLearner *learner = NULL;
  if (sgim_learner_new("simulation", "SGIM-PB", 7, 5, &learner) != SGIM_STATUS_OK) {
    fprintf(stderr, "new: %s\n", sgim_last_error_message());
    return 1;
  }
  if (sgim_learner_step(learner, 20) != SGIM_STATUS_OK) {
    fprintf(stderr, "step: %s\n", sgim_last_error_message());
    return 1;
  }
  SgimEvaluation e;
  sgim_learner_evaluate(learner, &e);
  double goal[2] = {0.5, 0.5};
  size_t length = 0;
  double perf = 0.0;
  SgimStatus r = sgim_learner_resolve(learner, 0, goal, 2, &length, &perf);
  printf("iteration %llu global %.4f memory %llu resolve %d length %zu\n", (unsigned long long)e.iteration, e.global,
         (unsigned long long)e.memory_size, (int)r, length);
  sgim_learner_free(learner);
  SgimLearner *bad = learner;
  if (sgim_learner_new("simulation", "nope", 7, 5, &bad) != SGIM_STATUS_INVALID_CONFIG || bad != NULL) {
    return 1;
  }
  return e.iteration == 20 && isfinite(e.global) ? 0 : 1;
}
