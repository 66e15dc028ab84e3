#include "authpeer/authpeer.h"

#include <string>

#include <json.hpp>

#include "authpeer/pipeline.hpp"

struct authpeer_ctx {
  std::string error;
};

extern "C" {

authpeer_ctx *authpeer_ctx_new(void) { return new (std::nothrow) authpeer_ctx(); }

void authpeer_ctx_free(authpeer_ctx *ctx) { delete ctx; }

const char *authpeer_ctx_error(const authpeer_ctx *ctx) {
  return ctx != nullptr ? ctx->error.c_str() : "null context";
}

authpeer_status authpeer_run(authpeer_ctx *ctx, const char *command, const char *options_json) {
  if (ctx == nullptr) return AUTHPEER_ERR_INPUT;
  ctx->error.clear();
  if (command == nullptr) {
    ctx->error = "null command";
    return AUTHPEER_ERR_INPUT;
  }
  nlohmann::json options = nlohmann::json::object();
  if (options_json != nullptr && options_json[0] != '\0') {
    options = nlohmann::json::parse(options_json, nullptr, false);
    if (options.is_discarded() || !options.is_object()) {
      ctx->error = "options_json is not a JSON object";
      return AUTHPEER_ERR_INPUT;
    }
  }
  int status = authpeer::pipeline::run_command(command, options, &ctx->error);
  return static_cast<authpeer_status>(status);
}

const char *authpeer_version(void) { return "0.1.0"; }

}  // extern "C"
