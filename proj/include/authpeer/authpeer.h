#ifndef AUTHPEER_H
#define AUTHPEER_H

/*
 * C interface to the authpeer pipeline. All state lives behind an opaque
 * context handle; every call reports a status code and leaves a readable
 * message on the context. Commands take their options as a JSON object
 * string mirroring the CLI flags, e.g.
 *
 *   authpeer_ctx *ctx = authpeer_ctx_new();
 *   authpeer_run(ctx, "simulate",
 *                "{\"scenario\":\"default\",\"out_events\":\"events.jsonl\"}");
 */

#include <stddef.h>

#if defined(_WIN32)
#define AUTHPEER_API __declspec(dllexport)
#else
#define AUTHPEER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct authpeer_ctx authpeer_ctx;

typedef enum authpeer_status {
  AUTHPEER_OK = 0,
  AUTHPEER_ERR_INPUT = 1,       /* missing/invalid inputs */
  AUTHPEER_ERR_CONVERGENCE = 2, /* a fit failed the r_hat gate */
  AUTHPEER_ERR_INTERNAL = 3     /* numerical or unexpected failure */
} authpeer_status;

AUTHPEER_API authpeer_ctx *authpeer_ctx_new(void);
AUTHPEER_API void authpeer_ctx_free(authpeer_ctx *ctx);

/* Last error message for this context; empty string when the previous call
 * succeeded. The pointer stays valid until the next call on the context. */
AUTHPEER_API const char *authpeer_ctx_error(const authpeer_ctx *ctx);

/* Runs one subcommand: simulate | ingest | cluster | fit | detect |
 * evaluate | report | pipeline. options_json must be a JSON object. */
AUTHPEER_API authpeer_status authpeer_run(authpeer_ctx *ctx, const char *command,
                                          const char *options_json);

AUTHPEER_API const char *authpeer_version(void);

#ifdef __cplusplus
}
#endif

#endif /* AUTHPEER_H */
