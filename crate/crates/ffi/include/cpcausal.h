#ifndef CPCAUSAL_H
#define CPCAUSAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum CpStatus {
  CP_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  CP_STATUS_NULL_ARGUMENT = 1,
  /*
   A string argument was not valid UTF-8.
   */
  CP_STATUS_INVALID_UTF8 = 2,
  /*
   Source text could not be parsed.
   */
  CP_STATUS_SYNTAX = 3,
  /*
   Well-formed input that violates a domain rule.
   */
  CP_STATUS_INVALID = 4,
  /*
   The probability-tree node budget was exhausted.
   */
  CP_STATUS_BUDGET = 5,
  /*
   An internal failure; the library state is unchanged.
   */
  CP_STATUS_INTERNAL = 6,
} CpStatus;

/*
 Opaque story handle; keeps its theory alive.
 */
typedef struct CpStory CpStory;

/*
 Opaque theory handle.
 */
typedef struct CpTheory CpTheory;

/*
 An exact probability: `exact` is a heap string such as `"49/50"`.
 */
typedef struct CpProbability {
  char *exact;
  double approx;
} CpProbability;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next call into the library on this thread.
 */
const char *cp_last_error(void);

/*
 Releases a string returned by the library. Null is ignored.

 # Safety
 `s` is null or was returned by this library and not yet freed.
 */
void cp_string_free(char *s);

/*
 Parses a theory.

 # Safety
 `source` is a nul-terminated string; `out` is writable.
 */
enum CpStatus cp_theory_parse(const char *source, struct CpTheory **out_theory);

/*
 # Safety
 `theory` is null or a handle not yet freed.
 */
void cp_theory_free(struct CpTheory *theory);

/*
 Number of laws in the theory.

 # Safety
 `theory` is a live handle.
 */
size_t cp_theory_len(const struct CpTheory *theory);

/*
 Canonical text of the theory.

 # Safety
 `theory` is a live handle; `out_text` is writable.
 */
enum CpStatus cp_theory_format(const struct CpTheory *theory, char **out_text);

/*
 Probability of a comma-separated conjunction of literals. A zero budget
 selects the default.

 # Safety
 Pointers are valid; `out_prob` is writable.
 */
enum CpStatus cp_marginal(const struct CpTheory *theory,
                          const char *query,
                          uint64_t budget_nodes,
                          struct CpProbability *out_prob);

/*
 Parses and validates a story against `theory`.

 # Safety
 Pointers are valid; `out_story` is writable.
 */
enum CpStatus cp_story_parse(const struct CpTheory *theory,
                             const char *source,
                             struct CpStory **out_story);

/*
 # Safety
 `story` is null or a handle not yet freed.
 */
void cp_story_free(struct CpStory *story);

/*
 Canonical text of the story, e.g. `"1:1 2:none"`.

 # Safety
 `story` is a live handle; `out_text` is writable.
 */
enum CpStatus cp_story_format(const struct CpStory *story, char **out_text);

/*
 Probability of `query` in the story's determinized theory after the
 intervention `action` (`~A` or `A`).

 # Safety
 Pointers are valid; `out_prob` is writable.
 */
enum CpStatus cp_counterfactual(const struct CpStory *story,
                                const char *action,
                                const char *query,
                                uint64_t budget_nodes,
                                struct CpProbability *out_prob);

/*
 Score of `cause` for `effect` under the named definition. `out_is_cause`
 receives 1 when the score is positive, 0 otherwise.

 # Safety
 Pointers are valid; the out-parameters are writable.
 */
enum CpStatus cp_cause_score(const struct CpStory *story,
                             const char *cause,
                             const char *effect,
                             const char *definition,
                             uint64_t budget_nodes,
                             struct CpProbability *out_prob,
                             int *out_is_cause);

/*
 Translates a neuron diagram (JSON) into a theory and its actual story.

 # Safety
 `json` is a nul-terminated string; both out-parameters are writable.
 */
enum CpStatus cp_neuron_translate(const char *json,
                                  struct CpTheory **out_theory,
                                  struct CpStory **out_story);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPCAUSAL_H */
