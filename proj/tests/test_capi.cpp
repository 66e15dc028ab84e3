// Exercises the shared-library C interface the way an embedding application
// would: opaque context, status codes, JSON options.

#include <cassert>
#include <cstdio>
#include <cstring>
#include <string>

#include "authpeer/authpeer.h"

#define CHECK(cond)                                                     \
  do {                                                                  \
    if (!(cond)) {                                                      \
      std::fprintf(stderr, "capi check failed at %s:%d: %s\n", __FILE__, \
                   __LINE__, #cond);                                    \
      return 1;                                                         \
    }                                                                   \
  } while (0)

int main() {
  CHECK(std::strcmp(authpeer_version(), "0.1.0") == 0);

  authpeer_ctx *ctx = authpeer_ctx_new();
  CHECK(ctx != nullptr);
  CHECK(std::strcmp(authpeer_ctx_error(ctx), "") == 0);

  // unknown command
  CHECK(authpeer_run(ctx, "bogus", "{}") == AUTHPEER_ERR_INPUT);
  CHECK(std::strlen(authpeer_ctx_error(ctx)) > 0);

  // malformed options
  CHECK(authpeer_run(ctx, "simulate", "not json") == AUTHPEER_ERR_INPUT);
  CHECK(authpeer_run(ctx, "simulate", "[1,2,3]") == AUTHPEER_ERR_INPUT);
  CHECK(authpeer_run(ctx, nullptr, "{}") == AUTHPEER_ERR_INPUT);

  // missing input file maps to the input-error status
  CHECK(authpeer_run(ctx, "ingest",
                     "{\"events\":\"/nonexistent/events.jsonl\","
                     "\"out_train\":\"/tmp/capi_train.csv\","
                     "\"out_test\":\"/tmp/capi_test.csv\"}") == AUTHPEER_ERR_INPUT);

  // a small end-to-end flow: simulate then ingest
  std::string simulate_opts =
      "{\"scenario\":\"fourblock\",\"seed\":3,"
      "\"out_events\":\"/tmp/capi_events.jsonl\","
      "\"out_truth\":\"/tmp/capi_truth.json\","
      "\"out_hr\":\"/tmp/capi_hr.csv\"}";
  CHECK(authpeer_run(ctx, "simulate", simulate_opts.c_str()) == AUTHPEER_OK);
  CHECK(std::strcmp(authpeer_ctx_error(ctx), "") == 0);

  std::string ingest_opts =
      "{\"events\":\"/tmp/capi_events.jsonl\",\"train_days\":14,\"test_days\":7,"
      "\"min_train_obs\":10,\"out_train\":\"/tmp/capi_train.csv\","
      "\"out_test\":\"/tmp/capi_test.csv\"}";
  CHECK(authpeer_run(ctx, "ingest", ingest_opts.c_str()) == AUTHPEER_OK);

  FILE *train = std::fopen("/tmp/capi_train.csv", "r");
  CHECK(train != nullptr);
  char header[64] = {0};
  CHECK(std::fgets(header, sizeof(header), train) != nullptr);
  CHECK(std::strcmp(header, "user,bucket,hour,dow,method,count\n") == 0);
  std::fclose(train);

  authpeer_ctx_free(ctx);
  authpeer_ctx_free(nullptr);  // must be safe
  std::puts("capi tests passed");
  return 0;
}
