/* C interface to the binori library. Every function that can fail returns a
 * binori_status; on failure binori_last_error() describes the problem for the
 * calling thread. Objects returned through out-pointers are owned by the
 * caller and released with the matching *_free function. */
#ifndef BINORI_BINORI_H
#define BINORI_BINORI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BINORI_API __declspec(dllexport)
#else
#define BINORI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum binori_status {
  BINORI_OK = 0,
  BINORI_ERR_INVALID_INPUT = 1,
  BINORI_ERR_INVALID_GEOMETRY = 2,
  BINORI_ERR_EMPTY_FEATURES = 3,
  BINORI_ERR_IO = 4,
  BINORI_ERR_FORMAT = 5,
  BINORI_ERR_INTERNAL = 99
} binori_status;

typedef struct binori_table binori_table;
typedef struct binori_batch binori_batch;
typedef struct binori_model binori_model;
typedef struct binori_report binori_report;

typedef struct binori_near_field {
  double head_radius_m;
  double speed_of_sound_mps;
  double reference_distance_m;
  double ear_azimuth_deg;
} binori_near_field;

typedef void (*binori_log_fn)(const char* message, void* user);

BINORI_API const char* binori_version(void);
BINORI_API const char* binori_last_error(void);
BINORI_API const char* binori_status_name(binori_status status);
BINORI_API void binori_string_free(char* s);

/* Directivity tables ------------------------------------------------------ */

BINORI_API void binori_near_field_default(binori_near_field* out);
BINORI_API binori_status binori_synth_hrtf(const binori_near_field* params, double grid_step_deg, size_t bins,
                                           double bin_hz, binori_table** left, binori_table** right);
BINORI_API binori_status binori_synth_vdp(double strength, size_t bins, double bin_hz, double grid_step_deg,
                                          binori_table** out);
BINORI_API binori_status binori_table_read(const char* path, binori_table** out);
BINORI_API binori_status binori_table_write(const binori_table* table, const char* path);
BINORI_API size_t binori_table_bins(const binori_table* table);
BINORI_API double binori_table_bin_hz(const binori_table* table);
BINORI_API void binori_table_free(binori_table* table);

/* Writes the synthetic listener and speaker pools described by a pool JSON
 * object (the "pools" block of a dataset spec) as table files plus sidecars. */
BINORI_API binori_status binori_write_pool_tables(const char* pool_json, const char* out_dir);

/* Rendering and features -------------------------------------------------- */

/* Renders `n` source samples into left/right (each n samples). near_field
 * selects the near-field model with those parameters; NULL renders far-field. */
BINORI_API binori_status binori_render(const double* source, size_t n, double sample_rate, double theta_dir_deg,
                                       double theta_ori_deg, double r_m, double h_m, const binori_table* hrtf_left,
                                       const binori_table* hrtf_right, const binori_table* vdp,
                                       const binori_near_field* near_field, double* left, double* right);

/* Five-channel feature tensor (channel-major, 5 * length floats) of a binaural
 * pair, with optional voicing preprocessing, using the harness defaults. */
BINORI_API binori_status binori_features(const double* left, const double* right, size_t n, double sample_rate,
                                         double h_m, int preprocess, size_t length, float* out);

/* Feature batches ---------------------------------------------------------- */

BINORI_API binori_status binori_generate_dataset(const char* spec_json, const char* labels_csv_path,
                                                 binori_batch** out);
BINORI_API binori_status binori_batch_read(const char* path, binori_batch** out);
BINORI_API binori_status binori_batch_write(const binori_batch* batch, const char* path);
BINORI_API size_t binori_batch_count(const binori_batch* batch);
BINORI_API size_t binori_batch_length(const binori_batch* batch);
/* Copies (theta_dir, theta_ori) pairs: 2 * count doubles. */
BINORI_API binori_status binori_batch_labels(const binori_batch* batch, double* out);
BINORI_API void binori_batch_free(binori_batch* batch);

/* Models ------------------------------------------------------------------- */

/* config_json fields (all optional): batch_size, learning_rate, epochs, seed,
 * dropout. start may be NULL; otherwise training continues from it. */
BINORI_API binori_status binori_train(const binori_batch* data, const char* config_json, const binori_model* start,
                                      binori_log_fn log, void* user, binori_model** out);
BINORI_API binori_status binori_model_save(const binori_model* model, const char* path);
BINORI_API binori_status binori_model_load(const char* path, binori_model** out);
/* Predicted (theta_dir, theta_ori) pairs: 2 * count doubles. */
BINORI_API binori_status binori_predict(const binori_model* model, const binori_batch* batch, double* out);
BINORI_API void binori_model_free(binori_model* model);

/* Evaluation ----------------------------------------------------------------- */

/* facing_sector_deg <= 0 selects the default of 25; half_width != 0 uses
 * sector / 2 as the facing bound. */
BINORI_API binori_status binori_evaluate(const binori_model* model, const binori_batch* batch,
                                         double facing_sector_deg, int half_width, binori_report** out);
/* p50, p80, p90 for theta_dir then theta_ori. */
BINORI_API binori_status binori_report_percentiles(const binori_report* report, double out[6]);
/* Accuracy per facing class (NaN for empty classes). */
BINORI_API binori_status binori_report_class_accuracy(const binori_report* report, double out[4]);
BINORI_API binori_status binori_report_json(const binori_report* report, char** out);
BINORI_API binori_status binori_report_write(const binori_report* report, const char* prefix);
BINORI_API void binori_report_free(binori_report* report);

/* Experiments and diagnostics -------------------------------------------------- */

/* name: main | near-vs-far | known-vs-unknown-hrtf | all. config_json may be
 * NULL for defaults; seed overrides the config's seed unless it is 0. */
BINORI_API binori_status binori_run_experiment(const char* name, const char* config_json, uint64_t seed,
                                               const char* out_dir, binori_log_fn log, void* user);
/* Writes hrtf.csv, vdp.csv, combined.csv and angles.csv into out_dir. */
BINORI_API binori_status binori_correlation_diagnostic(const binori_table* hrtf_left, const binori_table* hrtf_right,
                                                       const binori_table* vdp, double grid_step_deg,
                                                       const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
