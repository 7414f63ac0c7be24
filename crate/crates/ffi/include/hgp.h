#ifndef HGP_H
#define HGP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Brake onset range case codes.
typedef enum HgpBorCase {
  HGP_BOR_CASE_STATIONARY = 0,
  HGP_BOR_CASE_MOVING_MOVING = 1,
  HGP_BOR_CASE_MOVING_STOPPING = 2,
} HgpBorCase;

// Direction codes.
typedef enum HgpDirection {
  HGP_DIRECTION_ONGOING = 0,
  HGP_DIRECTION_ONCOMING = 1,
  HGP_DIRECTION_UNCLASSIFIED = 2,
} HgpDirection;

// Lateral zone codes.
typedef enum HgpLateral {
  HGP_LATERAL_FAR_LEFT = 0,
  HGP_LATERAL_LEFT = 1,
  HGP_LATERAL_ON_CENTRE = 2,
  HGP_LATERAL_RIGHT = 3,
  HGP_LATERAL_FAR_RIGHT = 4,
} HgpLateral;

// Result of every fallible call.
typedef enum HgpStatus {
  HGP_STATUS_OK = 0,
  HGP_STATUS_NULL_POINTER = 1,
  HGP_STATUS_INVALID_UTF8 = 2,
  HGP_STATUS_INVALID_ARGUMENT = 3,
  HGP_STATUS_CONFIG = 4,
  HGP_STATUS_IO = 5,
  HGP_STATUS_PARSE = 6,
  HGP_STATUS_NUMERICAL = 7,
  HGP_STATUS_BUFFER_TOO_SMALL = 8,
  HGP_STATUS_PANIC = 99,
} HgpStatus;

// Opaque kernel bank.
typedef struct HgpBank HgpBank;

// Opaque single-vehicle predictor.
typedef struct HgpPredictor HgpPredictor;

// Vehicle state at one instant: seconds, metres (ENU), m/s, radians
// counter-clockwise from east, m/s².
typedef struct HgpState {
  double t;
  double x;
  double y;
  double speed;
  double heading;
  double accel;
} HgpState;

// One forecast step.
typedef struct HgpForecastPoint {
  double t;
  double x;
  double y;
  double speed_mean;
  double speed_var;
  double heading_mean;
  double heading_var;
} HgpForecastPoint;

// Classification of a remote vehicle around the host.
typedef struct HgpClassification {
  // 1 when ahead of the host, 0 behind.
  int32_t ahead;
  enum HgpLateral lateral;
  enum HgpDirection direction;
  double x_rel;
  double ld;
  double dphi;
} HgpClassification;

// Forward collision warning result.
typedef struct HgpFcwResult {
  double r_w;
  // 1 when `range < r_w`.
  int32_t warn;
  enum HgpBorCase bor_case;
} HgpFcwResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (always
// NUL-terminated when `len > 0`) and returns the full message length
// without the terminator, or 0 when there is no error.
size_t hgp_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *hgp_version(void);

// Loads a `.bank.json` file.
enum HgpStatus hgp_bank_load(const char *path, struct HgpBank **out);

// Number of model pairs, 0 for NULL.
size_t hgp_bank_len(const struct HgpBank *bank);

void hgp_bank_free(struct HgpBank *bank);

// Creates a predictor by name (`bsm`, `cs`, `ca`, `kf`, `hgp`, `hgp-d`).
// `bank` may be NULL for predictors that do not need one; the predictor
// works on its own copy.
enum HgpStatus hgp_predictor_new(const char *name,
                                 const struct HgpBank *bank,
                                 struct HgpPredictor **out);

// Feeds one received message. Messages must arrive in time order.
enum HgpStatus hgp_predictor_observe(struct HgpPredictor *p, const struct HgpState *state);

// Writes `steps` forecast points (100 ms apart, after the last observed
// state) into `out`, which must hold `capacity` points. `written`
// receives the number of points, 0 before the first observation.
enum HgpStatus hgp_predictor_forecast(struct HgpPredictor *p,
                                      size_t steps,
                                      struct HgpForecastPoint *out,
                                      size_t capacity,
                                      size_t *written);

void hgp_predictor_free(struct HgpPredictor *p);

// Classifies `rv` relative to `hv` with lane width `w_lane` and the
// default heading thresholds.
enum HgpStatus hgp_classify(const struct HgpState *hv,
                            const struct HgpState *rv,
                            double w_lane,
                            struct HgpClassification *out);

// FCW for one host/remote pair at longitudinal gap `range` with reaction
// delay `t_d` (seconds) and required deceleration `a_req` (negative).
enum HgpStatus hgp_fcw_evaluate(double hv_speed,
                                double hv_accel,
                                double rv_speed,
                                double rv_accel,
                                double range,
                                double t_d,
                                double a_req,
                                struct HgpFcwResult *out);

// `E[cos h]` for `h ~ N(mu, var)`.
double hgp_expected_cos(double mu, double var);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HGP_H */
