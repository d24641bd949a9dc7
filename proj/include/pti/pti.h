#ifndef PTI_PTI_H
#define PTI_PTI_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define PTI_API __attribute__((visibility("default")))
#else
#define PTI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pti_status {
  PTI_OK = 0,
  PTI_ERR_CONFIG = 1,
  PTI_ERR_TRANSPORT = 2,
  PTI_ERR_DESYNC = 3,
  PTI_ERR_MODEL = 4,
  PTI_ERR_IO = 5,
  PTI_ERR_RANGE = 6,
  PTI_ERR_SHAPE = 7,
  PTI_ERR_OVERFLOW = 8,
  PTI_ERR_DECRYPTION = 9,
  PTI_ERR_INVALID_ARGUMENT = 10,
  PTI_ERR_INTERNAL = 11
} pti_status;

typedef enum pti_backend { PTI_BACKEND_CRYPTO = 0, PTI_BACKEND_IDEAL = 1 } pti_backend;

typedef struct pti_options {
  /* Fixed-point overrides; 0 keeps the model's parameters. */
  int ring_bits;
  int frac_bits;
  size_t poly_degree;
  pti_backend backend;
  uint64_t seed;
  int compress;
} pti_options;

typedef struct pti_model pti_model;
typedef struct pti_result pti_result;

/* Defaults: model parameters, N = 8192, crypto backend, seed 1, compression on. */
PTI_API void pti_options_init(pti_options* opts);

PTI_API const char* pti_status_string(pti_status status);
/* Message of the last failed call on this thread. */
PTI_API const char* pti_last_error(void);

PTI_API pti_status pti_model_load(const char* path, pti_model** out);
/* Random-weight fixture; config_json NULL selects the BERT-Tiny shape. */
PTI_API pti_status pti_model_random(const char* config_json, uint64_t seed, pti_model** out);
PTI_API pti_status pti_model_save(const pti_model* model, const char* path);
/* Caller frees the string with pti_string_free. */
PTI_API pti_status pti_model_config_json(const pti_model* model, char** out);
PTI_API size_t pti_model_embed_dim(const pti_model* model);
PTI_API void pti_model_free(pti_model* model);
PTI_API void pti_string_free(char* s);

/* Accepts one client on host:port and runs one inference as the server. */
PTI_API pti_status pti_serve(const pti_model* model, const char* listen_address, const pti_options* opts,
                             pti_result** out);
/* Connects to a server and runs one inference on a rows x cols input. */
PTI_API pti_status pti_client(const char* connect_address, const double* input, size_t rows, size_t cols,
                              const pti_options* opts, pti_result** out);
/* Both parties in this process over an in-memory channel. */
PTI_API pti_status pti_run_local(const pti_model* model, const double* input, size_t rows, size_t cols,
                                 const pti_options* opts, pti_result** out);
/* Fixed-point plaintext forward; reports OVERFLOW when bounds are exceeded. */
PTI_API pti_status pti_reference_forward(const pti_model* model, const double* input, size_t rows, size_t cols,
                                         pti_result** out);
/* Cumulative operator-substitution benchmark on a one-block random fixture
   shaped like `model` (NULL selects BERT-Tiny). */
PTI_API pti_status pti_bench(const pti_model* model, size_t seq_len, const pti_options* opts, pti_result** out);

PTI_API size_t pti_result_output_count(const pti_result* r);
PTI_API const double* pti_result_outputs(const pti_result* r);
/* Cost report (or benchmark) JSON; empty when the call has none. */
PTI_API const char* pti_result_report_json(const pti_result* r);
/* Formatted benchmark table; empty for other calls. */
PTI_API const char* pti_result_text(const pti_result* r);
PTI_API void pti_result_free(pti_result* r);

#ifdef __cplusplus
}
#endif

#endif

