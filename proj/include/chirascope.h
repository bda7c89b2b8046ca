/*
 * chirascope C API.
 *
 * Objects are opaque handles created by cs_*_read / cs_*_from_* / cs_analyze_*
 * and released with the matching cs_*_free. Every fallible call returns a
 * cs_status; on failure cs_last_error() describes the problem (the message
 * is per thread and valid until the next failing call on that thread).
 * Strings returned through `char**` are owned by the caller and released with
 * cs_string_free. `const char*` results borrow from their handle. Handle and
 * string out-parameters are set to NULL when a call fails.
 */
#ifndef CHIRASCOPE_H
#define CHIRASCOPE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CHIRASCOPE_BUILDING)
#define CS_API __declspec(dllexport)
#else
#define CS_API __declspec(dllimport)
#endif
#else
#define CS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
    CS_OK = 0,
    CS_ERR_INVALID_ARGUMENT = 1,
    CS_ERR_PARSE = 2,
    CS_ERR_NO_ANALYZABLE_LAYERS = 3,
    CS_ERR_LAYER_MISMATCH = 4,
    CS_ERR_NO_REFERENCES = 5,
    CS_ERR_IO = 6,
    CS_ERR_UNDEFINED_SIMILARITY = 7,
    CS_ERR_INTERNAL = 8
} cs_status;

typedef enum cs_init_method {
    CS_INIT_KAIMING_NORMAL = 0,
    CS_INIT_XAVIER_NORMAL = 1,
    CS_INIT_PLAIN_NORMAL = 2
} cs_init_method;

typedef struct cs_container cs_container;
typedef struct cs_report cs_report;
typedef struct cs_residual cs_residual;
typedef struct cs_fingerprint cs_fingerprint;
typedef struct cs_match cs_match;

CS_API const char* cs_version(void);
CS_API const char* cs_last_error(void);
CS_API const char* cs_status_name(cs_status status);
CS_API void cs_string_free(char* text);

/* ---- tensor container ---------------------------------------------------- */

CS_API cs_status cs_container_read(const char* path, cs_container** out);
CS_API cs_status cs_container_write(const cs_container* container, const char* path);
CS_API void cs_container_free(cs_container* container);

CS_API size_t cs_container_tensor_count(const cs_container* container);
CS_API const char* cs_container_tensor_name(const cs_container* container, size_t index);
/* Element type string, "F32" for decoded tensors. */
CS_API const char* cs_container_tensor_dtype(const cs_container* container, size_t index);
CS_API size_t cs_container_tensor_rank(const cs_container* container, size_t index);
CS_API uint64_t cs_container_tensor_extent(const cs_container* container, size_t index, size_t axis);
/* NULL when the key is absent. */
CS_API const char* cs_container_metadata(const cs_container* container, const char* key);
CS_API size_t cs_container_warning_count(const cs_container* container);
CS_API const char* cs_container_warning(const cs_container* container, size_t index);

/* ---- architectures and synthetic initialization -------------------------- */

CS_API size_t cs_architecture_count(void);
CS_API const char* cs_architecture_id(size_t index);
CS_API cs_status cs_parse_init_method(const char* text, cs_init_method* out);

/* Writes an untrained container and its manifest. Deterministic in
 * (arch, method, seed). */
CS_API cs_status cs_synth_model(const char* arch, cs_init_method method, uint64_t seed, const char* weights_path,
                                const char* manifest_path);

/* ---- analysis ------------------------------------------------------------ */

typedef struct cs_analyze_options {
    int flipped;        /* 0 selects the no-flip ablation */
    const char* suffix; /* tensor-name filter without a manifest; NULL = "weight" */
    unsigned threads;   /* 0 = CHIRASCOPE_THREADS or hardware concurrency */
    int stamp;          /* embed a UTC timestamp in the report */
} cs_analyze_options;

typedef struct cs_layer_info {
    const char* name;
    int stage; /* 1..5, 0 when unassigned */
    size_t kernels;
    size_t channels;
    size_t height;
    size_t width;
    double similarity;
} cs_layer_info;

CS_API void cs_analyze_options_init(cs_analyze_options* options);

/* manifest_path may be NULL. */
CS_API cs_status cs_analyze_file(const char* weights_path, const char* manifest_path,
                                 const cs_analyze_options* options, cs_report** out);
CS_API cs_status cs_report_from_json(const char* text, size_t length, cs_report** out);
CS_API cs_status cs_report_to_json(const cs_report* report, char** out);
CS_API void cs_report_free(cs_report* report);

CS_API const char* cs_report_model_name(const cs_report* report);
CS_API const char* cs_report_family(const cs_report* report);
CS_API int cs_report_flipped(const cs_report* report);
CS_API size_t cs_report_layer_count(const cs_report* report);
CS_API cs_status cs_report_layer(const cs_report* report, size_t index, cs_layer_info* out);
CS_API size_t cs_report_skipped_count(const cs_report* report);
CS_API cs_status cs_report_skipped(const cs_report* report, size_t index, const char** name, const char** reason);
/* Returns 1 and stores the mean when stage (1..5) has analyzed layers. */
CS_API int cs_report_stage_mean(const cs_report* report, int stage, double* out);
CS_API size_t cs_report_warning_count(const cs_report* report);
CS_API const char* cs_report_warning(const cs_report* report, size_t index);

/* ---- trained vs untrained ------------------------------------------------ */

CS_API cs_status cs_compare_reports(const cs_report* untrained, const cs_report* trained, cs_residual** out);
CS_API cs_status cs_residual_to_json(const cs_residual* residual, char** out);
CS_API void cs_residual_free(cs_residual* residual);
CS_API double cs_residual_total(const cs_residual* residual);
CS_API size_t cs_residual_layer_count(const cs_residual* residual);
CS_API int cs_residual_chirality_present(const cs_residual* residual);
CS_API size_t cs_residual_decreasing(const cs_residual* residual);
CS_API size_t cs_residual_increasing(const cs_residual* residual);

/* ---- fingerprints -------------------------------------------------------- */

typedef struct cs_thresholds {
    double untrained_below;
    double trained_above;
} cs_thresholds;

CS_API void cs_thresholds_init(cs_thresholds* thresholds);

CS_API cs_status cs_fingerprint_from_report(const cs_report* report, cs_fingerprint** out);
/* Accepts fingerprint documents and report documents. */
CS_API cs_status cs_fingerprint_from_json(const char* text, size_t length, cs_fingerprint** out);
CS_API cs_status cs_fingerprint_to_json(const cs_fingerprint* fingerprint, char** out);
CS_API void cs_fingerprint_free(cs_fingerprint* fingerprint);
CS_API const char* cs_fingerprint_model_name(const cs_fingerprint* fingerprint);

/* thresholds may be NULL for the defaults. */
CS_API cs_status cs_classify(const cs_report* query, const cs_fingerprint* const* references, size_t count,
                             const cs_thresholds* thresholds, cs_match** out);
CS_API cs_status cs_match_to_json(const cs_match* match, char** out);
CS_API void cs_match_free(cs_match* match);
CS_API const char* cs_match_best_family(const cs_match* match);
CS_API const char* cs_match_best_reference(const cs_match* match);
CS_API const char* cs_match_verdict(const cs_match* match);
CS_API double cs_match_baseline_deviation(const cs_match* match);

/* ---- plot data ----------------------------------------------------------- */

CS_API cs_status cs_plot_csv(const cs_report* const* reports, size_t count, char** out);

#ifdef __cplusplus
}
#endif

#endif /* CHIRASCOPE_H */
