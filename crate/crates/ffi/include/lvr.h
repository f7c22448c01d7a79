#ifndef LVR_H
#define LVR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LvrStatus {
  LVR_STATUS_OK = 0,
  LVR_STATUS_NULL_POINTER = 1,
  LVR_STATUS_INVALID_UTF8 = 2,
  LVR_STATUS_IO = 3,
  LVR_STATUS_PARSE = 4,
  LVR_STATUS_INVALID_ARGUMENT = 5,
  LVR_STATUS_VOCABULARY_MISMATCH = 6,
  LVR_STATUS_INVALID_SEQUENCE = 7,
  LVR_STATUS_ZERO_MASS = 8,
  LVR_STATUS_BUDGET_EXCEEDED = 9,
  LVR_STATUS_BUFFER_TOO_SMALL = 10,
  LVR_STATUS_INTERNAL = 11,
} LvrStatus;

typedef enum LvrDecoding {
  LVR_DECODING_GREEDY = 0,
  LVR_DECODING_SAMPLE = 1,
} LvrDecoding;

typedef struct LvrModel LvrModel;

typedef struct LvrSession LvrSession;

typedef struct LvrTokenizer LvrTokenizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent call on this thread if it failed, else null.
 * Valid until the next call into this library from the same thread.
 */
const char *lvr_last_error(void);

/**
 * Static name of a status code.
 */
const char *lvr_status_name(enum LvrStatus status);

/**
 * Load a tokenizer from a vocabulary JSON file and an optional merges file
 * (null for greedy). `eos` is a byte value or -1.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum LvrStatus lvr_tokenizer_load(const char *vocab_path,
                                  const char *merges_path,
                                  const char *alphabet,
                                  int32_t eos,
                                  struct LvrTokenizer **out);

/**
 * # Safety
 * `tok` must be null or a handle from this library not yet freed.
 */
void lvr_tokenizer_free(struct LvrTokenizer *tok);

/**
 * # Safety
 * `tok` must be a live handle.
 */
size_t lvr_tokenizer_vocab_size(const struct LvrTokenizer *tok);

/**
 * Encode `len` bytes of `text` into `ids`.
 *
 * # Safety
 * `text` must point to `len` readable bytes and `ids` to `cap` writable ids.
 */
enum LvrStatus lvr_tokenizer_encode(const struct LvrTokenizer *tok,
                                    const uint8_t *text,
                                    size_t len,
                                    uint32_t *ids,
                                    size_t cap,
                                    size_t *out_len);

/**
 * Concatenate the surfaces of `n` token ids into `buf`.
 *
 * # Safety
 * `ids` must point to `n` ids and `buf` to `cap` writable bytes.
 */
enum LvrStatus lvr_tokenizer_decode(const struct LvrTokenizer *tok,
                                    const uint32_t *ids,
                                    size_t n,
                                    uint8_t *buf,
                                    size_t cap,
                                    size_t *out_len);

/**
 * Load a model description file (table or n-gram JSON).
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum LvrStatus lvr_model_load(const char *path,
                              const char *alphabet,
                              int32_t eos,
                              struct LvrModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void lvr_model_free(struct LvrModel *model);

/**
 * New handle to the model's own tokenizer.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum LvrStatus lvr_model_tokenizer(const struct LvrModel *model, struct LvrTokenizer **out);

/**
 * Reduce `model` onto the vocabulary of `sub`. `top_k` = 0 means exact.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum LvrStatus lvr_session_new(const struct LvrModel *model,
                               const struct LvrTokenizer *sub,
                               size_t top_k,
                               struct LvrSession **out);

/**
 * # Safety
 * `session` must be null or a handle from this library not yet freed.
 */
void lvr_session_free(struct LvrSession *session);

/**
 * Sub-vocabulary size, i.e. the length of every distribution.
 *
 * # Safety
 * `session` must be a live handle.
 */
size_t lvr_session_vocab_size(const struct LvrSession *session);

/**
 * Next sub-token distribution. `dropped_mass` may be null.
 *
 * # Safety
 * `probs` must hold `cap` writable doubles.
 */
enum LvrStatus lvr_session_next_dist(struct LvrSession *session,
                                     double *probs,
                                     size_t cap,
                                     size_t *out_len,
                                     double *dropped_mass);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum LvrStatus lvr_session_step(struct LvrSession *session, uint32_t id);

/**
 * Generate up to `max_steps` sub-tokens (stopping after EOS) and write
 * the ids produced by this call.
 *
 * # Safety
 * `ids` must hold `cap` writable ids.
 */
enum LvrStatus lvr_session_generate(struct LvrSession *session,
                                    enum LvrDecoding decoding,
                                    uint64_t seed,
                                    size_t max_steps,
                                    uint32_t *ids,
                                    size_t cap,
                                    size_t *out_len);

/**
 * Decoded text of the session's prefix.
 *
 * # Safety
 * `buf` must hold `cap` writable bytes.
 */
enum LvrStatus lvr_session_text(const struct LvrSession *session,
                                uint8_t *buf,
                                size_t cap,
                                size_t *out_len);

/**
 * # Safety
 * `session` must be a live handle.
 */
bool lvr_session_is_terminated(const struct LvrSession *session);

/**
 * Exhaustively compare prefix probabilities of `model` and its exact
 * reduction onto `sub` on every text up to `max_len` symbols.
 *
 * # Safety
 * Handles must be live; `max_discrepancy` and `pass` must be writable.
 */
enum LvrStatus lvr_verify_lossless(const struct LvrModel *model,
                                   const struct LvrTokenizer *sub,
                                   size_t max_len,
                                   double tol,
                                   double *max_discrepancy,
                                   bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LVR_H */
