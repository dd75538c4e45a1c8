#ifndef OPENKI_H
#define OPENKI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpenkiStatus {
  OPENKI_STATUS_OK = 0,
  OPENKI_STATUS_NULL_POINTER = 1,
  OPENKI_STATUS_INVALID_UTF8 = 2,
  OPENKI_STATUS_IO = 3,
  OPENKI_STATUS_MALFORMED_INPUT = 4,
  OPENKI_STATUS_UNKNOWN_NAME = 5,
  OPENKI_STATUS_UNSEEN_ENTITY = 6,
  OPENKI_STATUS_UNSEEN_PAIR = 7,
  OPENKI_STATUS_EMPTY_PAIR_EVIDENCE = 8,
  OPENKI_STATUS_INVALID_ARGUMENT = 9,
  OPENKI_STATUS_CORRUPT_CHECKPOINT = 10,
  OPENKI_STATUS_VERSION_MISMATCH = 11,
  OPENKI_STATUS_NO_POSITIVES = 12,
  OPENKI_STATUS_PANIC = 13,
} OpenkiStatus;

// Trained model bound to its split.
typedef struct OpenkiSession OpenkiSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *openki_last_error(void);

// Static description of a status code.
const char *openki_status_name(enum OpenkiStatus status);

// Opens a split directory and a checkpoint trained on it.
//
// # Safety
// `split_dir` and `checkpoint` must be NUL-terminated strings; `out` must be
// a valid pointer.
enum OpenkiStatus openki_session_open(const char *split_dir,
                                      const char *checkpoint,
                                      struct OpenkiSession **out);

// Releases a session; null is ignored.
//
// # Safety
// `session` must come from [`openki_session_open`] and not be freed twice.
void openki_session_free(struct OpenkiSession *session);

// Number of KB relations; 0 for a null session.
//
// # Safety
// `session` must be null or a live session.
uintptr_t openki_session_num_kb_relations(const struct OpenkiSession *session);

// Id of the `i`-th KB relation (ascending id order).
//
// # Safety
// `session` must be a live session and `out` a valid pointer.
enum OpenkiStatus openki_session_kb_relation(const struct OpenkiSession *session,
                                             uintptr_t i,
                                             uint32_t *out);

// Looks up an entity id by name.
//
// # Safety
// `session` must be a live session, `name` a NUL-terminated string and
// `out` a valid pointer.
enum OpenkiStatus openki_session_entity_id(const struct OpenkiSession *session,
                                           const char *name,
                                           uint32_t *out);

// Looks up a relation or predicate id by name.
//
// # Safety
// As for [`openki_session_entity_id`].
enum OpenkiStatus openki_session_relation_id(const struct OpenkiSession *session,
                                             const char *name,
                                             uint32_t *out);

// Name of an entity (`is_relation == 0`) or relation, or null for an
// unknown id. The string lives as long as the session.
//
// # Safety
// `session` must be null or a live session.
const char *openki_session_name(const struct OpenkiSession *session, uint32_t id, bool is_relation);

// Scores `(subject, relation, object)` using the evidence recorded in the
// split. Entity ids outside the vocabulary are treated as unseen entities.
//
// # Safety
// `session` must be a live session and `out` a valid pointer.
enum OpenkiStatus openki_session_score(const struct OpenkiSession *session,
                                       uint32_t subject,
                                       uint32_t object,
                                       uint32_t relation,
                                       double *out);

// Like [`openki_session_score`], with the pair's predicates replaced by
// `predicates[0..n]`.
//
// # Safety
// `predicates` must point to `n` readable ids (or be null with `n == 0`).
enum OpenkiStatus openki_session_score_with_predicates(const struct OpenkiSession *session,
                                                       uint32_t subject,
                                                       uint32_t object,
                                                       uint32_t relation,
                                                       const uint32_t *predicates,
                                                       uintptr_t n,
                                                       double *out);

// Average precision of `relevance[0..n]` in ranked order (non-zero =
// relevant).
//
// # Safety
// `relevance` must point to `n` readable bytes; `out` must be valid.
enum OpenkiStatus openki_average_precision(const uint8_t *relevance, uintptr_t n, double *out);

// Step-interpolated area under the precision-recall curve.
//
// # Safety
// `scores` and `labels` must point to `n` readable elements; `out` must be
// valid.
enum OpenkiStatus openki_auc_pr(const double *scores,
                                const uint8_t *labels,
                                uintptr_t n,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPENKI_H */
