#include <math.h>
#include <stdio.h>
#include <string.h>

#include "decoupler/decoupler.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(void) {
  dc_nonlinearity* s = NULL;
  dc_field* f = NULL;
  dc_field* g = NULL;
  double v = 0.0, h = 0.0;
  int nq = 0, nb = 0;
  char* report = NULL;
  dc_run_options opt;

  EXPECT(strlen(dc_version()) > 0);

  EXPECT(dc_nonlinearity_create("linear", "{\"beta\": 0.4}", &s) == DC_OK);
  EXPECT(dc_nonlinearity_eval(s, 2.0, &v) == DC_OK && fabs(v - 0.8) < 1e-15);
  EXPECT(dc_field_oracle(s, 1.0, 0.1, 2.0, 0.5, &f) == DC_OK);
  EXPECT(dc_field_shape(f, &nq, &nb) == DC_OK && nq == 11 && nb == 9);
  EXPECT(dc_field_rescale(f, 2.0, &g) == DC_OK);
  EXPECT(dc_field_horizon(g, &h) == DC_OK && fabs(h - 0.25) < 1e-14);
  /* J_{0.8 id}(q, b) = 0.8 b / sqrt(1 - 0.64 q) */
  EXPECT(dc_field_eval(g, 0.1, 1.0, &v) == DC_OK && fabs(v - 0.8 / sqrt(1.0 - 0.064)) < 1e-10);
  EXPECT(dc_field_save(g, "capi_field.dcf") == DC_OK);
  dc_field_free(g);
  g = NULL;
  EXPECT(dc_field_load("capi_field.dcf", &g) == DC_OK);
  EXPECT(dc_field_eval(g, 0.1, 1.0, &v) == DC_OK && fabs(v - 0.8 / sqrt(1.0 - 0.064)) < 1e-10);
  remove("capi_field.dcf");

  EXPECT(dc_field_load("no_such_file.dcf", &f) == DC_ERR_IO);
  EXPECT(strlen(dc_last_error()) > 0);
  EXPECT(dc_nonlinearity_create("no_such_family", NULL, &s) != DC_OK);
  EXPECT(dc_field_rescale(g, -1.0, &f) == DC_ERR_INVALID_ARGUMENT);
  EXPECT(dc_field_eval(NULL, 0.0, 0.0, &v) == DC_ERR_INVALID_ARGUMENT);

  dc_run_options_init(&opt);
  opt.seed = 5;
  EXPECT(dc_run("oracle", "{\"nonlinearity\": {\"family\": \"linear\", \"params\": {\"beta\": 0.5}}}", &opt,
                &report) == 0);
  EXPECT(report != NULL && strstr(report, "\"seed\": 5") != NULL);
  dc_string_free(report);
  EXPECT(dc_run("oracle", "{not json", &opt, &report) == 2);
  EXPECT(report == NULL);
  opt.tier = "bogus";
  EXPECT(dc_run("verify", "{}", &opt, NULL) == 2);

  dc_field_free(g);
  dc_field_free(NULL);
  dc_nonlinearity_free(s);
  if (failures) fprintf(stderr, "%d failures\n", failures);
  return failures ? 1 : 0;
}
