#ifndef V2V_H
#define V2V_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum V2vStatus {
  V2V_STATUS_OK = 0,
  V2V_STATUS_NULL_POINTER = 1,
  V2V_STATUS_INVALID_ARGUMENT = 2,
  V2V_STATUS_CONFIG = 3,
  V2V_STATUS_OUT_OF_RANGE = 4,
  V2V_STATUS_DIMENSION_MISMATCH = 5,
  V2V_STATUS_IO = 6,
  V2V_STATUS_CHECKPOINT = 7,
  V2V_STATUS_DIVERGED = 8,
  V2V_STATUS_PANIC = 9,
} V2vStatus;

typedef enum V2vMode {
  V2V_MODE_UNICAST = 0,
  V2V_MODE_BROADCAST = 1,
} V2vMode;

// Run configuration.
typedef struct V2vConfig V2vConfig;

// Simulation environment in either mode.
typedef struct V2vEnv V2vEnv;

// Trained Q-network.
typedef struct V2vQNetwork V2vQNetwork;

// Chooses an action index for one decision, given its feature vector.
typedef size_t (*V2vChooseFn)(void *user, const double *features, size_t len);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *v2v_last_error(void);

// Frees a string returned by this library.
void v2v_string_free(char *s);

// Shannon capacity `bandwidth * log2(1 + sinr)` in bits/s.
double v2v_capacity(double sinr, double bandwidth_hz);

double v2v_dbm_to_mw(double dbm);

enum V2vStatus v2v_config_default(enum V2vMode mode, struct V2vConfig **out);

// Parses a TOML configuration; missing keys take their defaults.
enum V2vStatus v2v_config_from_toml(const char *text, struct V2vConfig **out);

// Serializes `cfg` as TOML into a new string freed with [`v2v_string_free`].
enum V2vStatus v2v_config_to_toml(const struct V2vConfig *cfg, char **out);

enum V2vStatus v2v_config_set_vehicles(struct V2vConfig *cfg, size_t n_vehicles);

enum V2vStatus v2v_config_set_train_episodes(struct V2vConfig *cfg, size_t episodes);

void v2v_config_free(struct V2vConfig *cfg);

// Creates an environment for `cfg`'s mode seeded with `seed`.
enum V2vStatus v2v_env_new(const struct V2vConfig *cfg, uint64_t seed, struct V2vEnv **out);

void v2v_env_free(struct V2vEnv *env);

enum V2vStatus v2v_env_observation_dim(const struct V2vEnv *env, size_t *out);

enum V2vStatus v2v_env_action_count(const struct V2vEnv *env, size_t *out);

enum V2vStatus v2v_env_is_done(const struct V2vEnv *env, bool *out);

// Starts a new episode.
enum V2vStatus v2v_env_reset(struct V2vEnv *env);

// Advances one slot. `choose` is called once per decision. The sum of the
// decisions' rewards and their count are written to the optional outputs.
enum V2vStatus v2v_env_step(struct V2vEnv *env,
                            V2vChooseFn choose,
                            void *user,
                            double *reward_sum,
                            size_t *decisions);

// Loads the network stored in a checkpoint file.
enum V2vStatus v2v_qnet_load(const char *path, struct V2vQNetwork **out);

void v2v_qnet_free(struct V2vQNetwork *net);

size_t v2v_qnet_input_dim(const struct V2vQNetwork *net);

size_t v2v_qnet_output_dim(const struct V2vQNetwork *net);

// Q-values of `input` written to `output`, which must hold `output_len`
// values equal to the network's output dimension.
enum V2vStatus v2v_qnet_forward(const struct V2vQNetwork *net,
                                const double *input,
                                size_t input_len,
                                double *output,
                                size_t output_len);

enum V2vStatus v2v_qnet_greedy(const struct V2vQNetwork *net,
                               const double *input,
                               size_t input_len,
                               size_t *action);

// Trains with `cfg` and writes `checkpoint.bin` and `training_curve.csv`
// into `out_dir`.
enum V2vStatus v2v_train(const struct V2vConfig *cfg, const char *out_dir);

// Greedy evaluation of `net` with `cfg`; writes the mean V2I sum rate
// (bits/s) and satisfaction probability over the configured seeds.
enum V2vStatus v2v_evaluate(const struct V2vConfig *cfg,
                            const struct V2vQNetwork *net,
                            double *v2i_rate_bps,
                            double *satisfied);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* V2V_H */
