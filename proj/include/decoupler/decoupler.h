#ifndef DECOUPLER_DECOUPLER_H
#define DECOUPLER_DECOUPLER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef DECOUPLER_BUILDING
#    define DECOUPLER_API __declspec(dllexport)
#  else
#    define DECOUPLER_API __declspec(dllimport)
#  endif
#else
#  define DECOUPLER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dc_status {
  DC_OK = 0,
  DC_ERR_INVALID_ARGUMENT = 1,
  DC_ERR_NOT_PSD = 2,
  DC_ERR_NUMERICAL = 3,
  DC_ERR_HORIZON = 4,
  DC_ERR_CONFIG = 5,
  DC_ERR_IO = 6,
  DC_ERR_NOT_CONVERGED = 7,
  DC_ERR_INTERNAL = 99
} dc_status;

typedef struct dc_field dc_field;
typedef struct dc_nonlinearity dc_nonlinearity;

/* Run options. Negative seed/workers mean "not set". tier may be NULL. */
typedef struct dc_run_options {
  int64_t seed;
  int workers;
  const char* out_dir;
  const char* tier;
  void (*log)(const char* line, void* user);
  void* user;
} dc_run_options;

DECOUPLER_API const char* dc_version(void);

/* Message for the last failing call on this thread; never NULL. */
DECOUPLER_API const char* dc_last_error(void);

DECOUPLER_API void dc_run_options_init(dc_run_options* opt);

/*
 * Runs a subcommand (decouple, pde, spde-onepoint, spde-multipoint, oracle,
 * verify) on a JSON config. Returns the process exit code: 0 ok, 2 config,
 * 3 numerical, 4 criterion failure. If report_json is non-NULL it receives a
 * malloc'd string to be released with dc_string_free.
 */
DECOUPLER_API int dc_run(const char* command, const char* config_json, const dc_run_options* opt,
                         char** report_json);

DECOUPLER_API void dc_string_free(char* s);

DECOUPLER_API dc_status dc_nonlinearity_create(const char* family, const char* params_json, dc_nonlinearity** out);
DECOUPLER_API dc_status dc_nonlinearity_tabulated(double b0, double db, const double* values, size_t count,
                                                  dc_nonlinearity** out);
DECOUPLER_API dc_status dc_nonlinearity_eval(const dc_nonlinearity* s, double b, double* out);
DECOUPLER_API void dc_nonlinearity_free(dc_nonlinearity* s);

DECOUPLER_API dc_status dc_field_load(const char* path, dc_field** out);
DECOUPLER_API dc_status dc_field_save(const dc_field* f, const char* path);
/* Closed-form field J on [0, Q0] x [-B, B], when the family has one. */
DECOUPLER_API dc_status dc_field_oracle(const dc_nonlinearity* s, double Q0, double dq, double B, double db,
                                        dc_field** out);
DECOUPLER_API dc_status dc_field_rescale(const dc_field* f, double zeta, dc_field** out);
DECOUPLER_API dc_status dc_field_eval(const dc_field* f, double q, double b, double* out);
DECOUPLER_API dc_status dc_field_horizon(const dc_field* f, double* out);
DECOUPLER_API dc_status dc_field_shape(const dc_field* f, int* nq, int* nb);
DECOUPLER_API void dc_field_free(dc_field* f);

#ifdef __cplusplus
}
#endif

#endif
