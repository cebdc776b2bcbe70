#ifndef IMPASSE_LAB_H
#define IMPASSE_LAB_H

/* C interface of the impasse-lab simulator. All handles are opaque. Every
 * function returning il_status records a message retrievable with
 * il_last_error() (per thread) when it fails. Bus ids are the 1-based ids of
 * the case file. */

#include <stddef.h>

#if defined(_WIN32)
#define IL_API __declspec(dllexport)
#else
#define IL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum il_status {
    IL_OK = 0,
    IL_ERR_NUMERICAL = 2,
    IL_ERR_INPUT = 3
} il_status;

typedef enum il_termination {
    IL_HORIZON_REACHED = 0,
    IL_IMPASSE_HIT = 1,
    IL_ASSUMPTION2_VIOLATION = 2
} il_termination;

typedef struct il_case il_case;
typedef struct il_trajectory il_trajectory;

typedef struct il_case_info {
    int buses;
    int generators;
    int motors;
    int static_loads;
    int scenarios;
    int warnings;
} il_case_info;

typedef struct il_sim_options {
    double horizon;
    double dt;
    double dt_fine;
    double fine_window;
    double arming_delay;
    int require_recovery;
    int refine_impasse;
    /* Motor bus id to shed when I_vs drops through shed_threshold; 0 = none. */
    int shed_motor_bus;
    double shed_threshold;
    /* Extra shunt susceptance installed before the disturbance; bus 0 = none. */
    int extra_shunt_bus;
    double extra_shunt_b0;
} il_sim_options;

typedef struct il_summary {
    il_termination termination;
    double t_hit;            /* NaN unless termination == IL_IMPASSE_HIT */
    double ivs_first_below;  /* NaN if I_vs never dropped below 1 */
    double ivs_crossing;     /* armed post-clear crossing, NaN if none */
    double shed_time;        /* NaN if nothing was shed */
    double t_end;
    size_t samples;
} il_summary;

typedef struct il_sample {
    double t;
    double sigma_min_y1;
    double rhs;
    double i_vs;
    double sigma_min_jalg;
    double sigma_max_jalg;
    double min_mod_eig;
    int hit;
} il_sample;

typedef struct il_theorem2 {
    int applicable;
    int conditions[4];
    int wcdd;
    int immune;
    char notes[2048]; /* newline separated */
} il_theorem2;

typedef struct il_sensitivity_row {
    int bus;
    double value;     /* -u_i^2 */
    double fd_value;  /* central difference of sigma_min(Y1) */
    int degenerate;
    int approximation_ok;
    double lambda_min;
} il_sensitivity_row;

typedef struct il_lemma1_summary {
    int samples;
    double max_chain_residual[4];
    double max_det_ratio_error;
    double min_sigma_jalg;
} il_lemma1_summary;

IL_API const char* il_last_error(void);
IL_API const char* il_version(void);

IL_API il_status il_case_load(const char* path, int strict, il_case** out);
IL_API void il_case_free(il_case* c);
IL_API il_status il_case_get_info(const il_case* c, il_case_info* out);
IL_API const char* il_case_scenario_name(const il_case* c, int index);
IL_API const char* il_case_warning(const il_case* c, int index);

IL_API void il_sim_options_default(il_sim_options* options);
IL_API il_status il_simulate(const il_case* c, const char* scenario, const il_sim_options* options,
                             il_trajectory** out);
/* Runs `count` scenarios concurrently with at most `threads` workers. */
IL_API il_status il_simulate_batch(const il_case* c, const char* const* scenarios, int count,
                                   const il_sim_options* options, int threads, il_trajectory** out);
IL_API void il_trajectory_free(il_trajectory* t);
IL_API il_status il_trajectory_get_summary(const il_trajectory* t, il_summary* out);
IL_API il_status il_trajectory_get_sample(const il_trajectory* t, size_t index, il_sample* out);
IL_API il_status il_trajectory_write_csv(const il_trajectory* t, const il_case* c, const char* path);
IL_API il_status il_trajectory_write_summary(const il_trajectory* t, const char* path);
IL_API il_status il_write_plots(const il_case* c, const il_trajectory* const* runs, int count, int bus,
                                const char* directory);
IL_API const char* il_termination_name(il_termination t);

IL_API il_status il_theorem2_check(const il_case* c, il_theorem2* out);
/* Shunt sensitivity at every bus of the pre-disturbance equilibrium of
 * `scenario` (NULL: the bare case). `rows` must hold il_case_info.buses. */
IL_API il_status il_sensitivity(const il_case* c, const char* scenario, il_sensitivity_row* rows);
IL_API il_status il_lemma1_verify(const il_case* c, int samples, unsigned long long seed, il_lemma1_summary* out);
/* t_hit (NaN when stable) for `points` shunt values evenly spaced in
 * [b0_min, b0_max] at `bus`, installed before the disturbance. */
IL_API il_status il_scan(const il_case* c, const char* scenario, int bus, double b0_min, double b0_max, int points,
                         const il_sim_options* options, int threads, double* b0_out, double* t_hit_out);

#ifdef __cplusplus
}
#endif

#endif
