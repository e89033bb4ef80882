#ifndef FRUSTUM_FRUSTUM_H
#define FRUSTUM_FRUSTUM_H

/* C interface of the frustum library. Every function returns a status; on
 * failure frustum_last_error() describes the problem for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * frustum_string_free. Poses in JSON use {"q": [s, x, y, z], "t": [x, y, z],
 * "from": frame, "to": frame}, millimetres and degrees. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FR_API __declspec(dllexport)
#elif defined(__GNUC__)
#define FR_API __attribute__((visibility("default")))
#else
#define FR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum frustum_status {
  FRUSTUM_OK = 0,
  FRUSTUM_E_FRAME_MISMATCH = 1,
  FRUSTUM_E_DEGENERATE_MOTION = 2,
  FRUSTUM_E_INSUFFICIENT_DATA = 3,
  FRUSTUM_E_PARALLEL_RAYS = 4,
  FRUSTUM_E_COPLANAR_VIEWS = 5,
  FRUSTUM_E_NEAR_PLANE_OUT_OF_RANGE = 6,
  FRUSTUM_E_BEHIND_SOURCE = 7,
  FRUSTUM_E_COLLINEAR_LANDMARKS = 8,
  FRUSTUM_E_DEGENERATE_PROJECTION = 9,
  FRUSTUM_E_NO_CROSSING = 10,
  FRUSTUM_E_INVALID_PARAMS = 11,
  FRUSTUM_E_SCHEMA_MISMATCH = 12,
  FRUSTUM_E_CORRUPT_LOG = 13,
  FRUSTUM_E_NOT_FOUND = 14,
  FRUSTUM_E_BAD_REQUEST = 15,
  FRUSTUM_E_INTERNAL = 100
} frustum_status;

typedef struct frustum_service frustum_service;

FR_API const char* frustum_version(void);
/* Message of the last failure on this thread, "" after a success. */
FR_API const char* frustum_last_error(void);
/* Module error name, e.g. "insufficient_data". */
FR_API const char* frustum_status_name(frustum_status status);
/* Service error code the status is reported under, e.g. "degenerate_motion". */
FR_API const char* frustum_status_api_code(frustum_status status);
FR_API void frustum_string_free(char* s);

/* Pose-pair file ({"schema": "frustum-pairs/v1", "pairs": [{"a", "b"}], optional
 * "ground_truth"}) -> calibration result JSON. */
FR_API frustum_status frustum_calibrate(const char* pairs_json, char** result_json);

/* {"n", "rot_deg", "trans_mm", "rot_sigma_deg", "trans_sigma_mm", "seed",
 * optional "ground_truth"} -> pose-pair file. */
FR_API frustum_status frustum_generate_pairs(const char* request_json, char** pairs_json);

/* Sub-sampling experiment over a pose-pair file -> CSV, one row per size. */
FR_API frustum_status frustum_sampling_csv(const char* pairs_json, const int* sizes,
                                           size_t n_sizes, int repeats, uint64_t seed,
                                           char** csv);

/* kind is "kwire" or "tha"; config_json may be NULL or "{}" for defaults.
 * When sessions_dir is not NULL every repeat's session file is written
 * there. */
FR_API frustum_status frustum_run_experiment(const char* kind, const char* config_json,
                                             const char* sessions_dir, char** csv);

/* Replays a session file and returns a JSON summary. */
FR_API frustum_status frustum_replay_file(const char* path, char** summary_json);

/* Least-squares closest point to n rays (origins and directions packed as
 * xyz triples). */
FR_API frustum_status frustum_triangulate(const double* origins, const double* directions,
                                          size_t n, double point[3], double* residual);

/* Session service over a directory of session files. state_dir may be NULL,
 * then $FRUSTUM_STATE_DIR or ./frustum-state is used. */
FR_API frustum_status frustum_service_create(const char* state_dir, frustum_service** out);
FR_API void frustum_service_destroy(frustum_service* service);
/* One HTTP request without a socket. The response body is not
 * NUL-terminated for binary content; its length is in *response_len. */
FR_API frustum_status frustum_service_handle(frustum_service* service, const char* method,
                                             const char* path, const char* body,
                                             size_t body_len, int* http_status,
                                             char** content_type, char** response,
                                             size_t* response_len);
/* Blocks serving HTTP/1.1 until frustum_service_stop is called. */
FR_API frustum_status frustum_service_serve(frustum_service* service, const char* host,
                                            int port);
FR_API void frustum_service_stop(frustum_service* service);

#ifdef __cplusplus
}
#endif

#endif
