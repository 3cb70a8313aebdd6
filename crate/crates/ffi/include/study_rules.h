#ifndef STUDY_RULES_H
#define STUDY_RULES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_UTF8 = 2,
  // Invalid settings: unknown feature family, malformed label, bad hyperparameters.
  SR_STATUS_CONFIG_ERROR = 3,
  // Malformed or unusable input data.
  SR_STATUS_DATA_ERROR = 4,
  SR_STATUS_COMPUTATION_ERROR = 5,
  // A bug inside the library; the handles involved must not be reused.
  SR_STATUS_PANIC = 6,
} SrStatus;

// Feature matrix and labels of the students a label is defined for.
typedef struct SrDataset SrDataset;

// A parsed or generated event log.
typedef struct SrLog SrLog;

// Rules in ranking order.
typedef struct SrRuleSet SrRuleSet;

typedef struct SrTree SrTree;

typedef struct {
  size_t max_depth;
  size_t min_samples_leaf;
  size_t min_samples_split;
} SrHyperparams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *sr_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library that was not freed yet.
void sr_string_free(char *s);

SrHyperparams sr_hyperparams_default(void);

// Parses CSV event-log text with the default column names.
//
// # Safety
// `csv` must be a nul-terminated string; `out` must be writable.
SrStatus sr_log_parse_csv(const char *csv, char delimiter, SrLog **out);

// Generates a synthetic log from `key = value` settings (`n_students`,
// `seed`, `target`, `planted`, ...). NULL or empty text uses the defaults.
//
// # Safety
// `config` must be NULL or a nul-terminated string; `out` must be writable.
SrStatus sr_log_synthesize(const char *config, SrLog **out);

// # Safety
// `log` must be a live log handle; `events` and `students` must be writable.
SrStatus sr_log_counts(const SrLog *log, size_t *events, size_t *students);

// Writes the log as CSV in the format [`sr_log_parse_csv`] reads.
//
// # Safety
// `log` must be a live log handle; `out` must be writable.
SrStatus sr_log_to_csv(const SrLog *log, char **out);

// # Safety
// `log` must be NULL or a handle that was not freed yet.
void sr_log_free(SrLog *log);

// Builds the feature matrix and labels. `features` is a comma-separated
// selection such as `"a-cs,a-pl-s"`; `label` is `gpa:2`, `gpa:4` or
// `course:<id>:<semester>`.
//
// # Safety
// `log` must be a live log handle, the strings nul-terminated, `out` writable.
SrStatus sr_dataset_prepare(const SrLog *log,
                            const char *features,
                            const char *label,
                            SrDataset **out);

// # Safety
// `dataset` must be a live dataset handle; `rows` and `cols` must be writable.
SrStatus sr_dataset_shape(const SrDataset *dataset, size_t *rows, size_t *cols);

// # Safety
// `dataset` must be NULL or a handle that was not freed yet.
void sr_dataset_free(SrDataset *dataset);

// # Safety
// `dataset` must be a live dataset handle; `out` must be writable.
SrStatus sr_tree_fit(const SrDataset *dataset, SrHyperparams params, SrTree **out);

// # Safety
// `tree` must be a live tree handle; `depth` and `leaves` must be writable.
SrStatus sr_tree_shape(const SrTree *tree, size_t *depth, size_t *leaves);

// # Safety
// `tree` must be a live tree handle; `out` must be writable.
SrStatus sr_tree_to_json(const SrTree *tree, char **out);

// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
SrStatus sr_tree_from_json(const char *json, SrTree **out);

// # Safety
// `tree` must be a live tree handle; `out` must be writable.
SrStatus sr_tree_to_dot(const SrTree *tree, char **out);

// # Safety
// `tree` must be NULL or a handle that was not freed yet.
void sr_tree_free(SrTree *tree);

// Reads one rule per leaf, with support counted on `dataset`. `relevancy`
// is `product`, `harmonic`, `fblend:<beta>`, or NULL for `product`.
//
// # Safety
// `tree` and `dataset` must be live handles, `relevancy` NULL or
// nul-terminated, `out` writable.
SrStatus sr_rules_extract(const SrTree *tree,
                          const SrDataset *dataset,
                          const char *relevancy,
                          SrRuleSet **out);

// # Safety
// `rules` must be a live rule-set handle; `out` must be writable.
SrStatus sr_rules_count(const SrRuleSet *rules, size_t *out);

// Renders the rule at rank `index` (0 is the most relevant) as
// `IF ... THEN ...` text.
//
// # Safety
// `rules` must be a live rule-set handle; `out` must be writable.
SrStatus sr_rules_render(const SrRuleSet *rules, size_t index, char **out);

// # Safety
// `rules` must be a live rule-set handle; the out-parameters must be writable.
SrStatus sr_rules_stats(const SrRuleSet *rules,
                        size_t index,
                        size_t *support,
                        double *confidence,
                        double *relevancy);

// # Safety
// `rules` must be NULL or a handle that was not freed yet.
void sr_rules_free(SrRuleSet *rules);

// Stratified k-fold cross-validation. Writes the mean accuracy and the
// `mean ± sd` percentage table; `report` may be NULL.
//
// # Safety
// `dataset` must be a live handle; `mean_accuracy` writable; `report` NULL or writable.
SrStatus sr_cross_validate(const SrDataset *dataset,
                           SrHyperparams params,
                           size_t k,
                           uint64_t seed,
                           double *mean_accuracy,
                           char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STUDY_RULES_H */
