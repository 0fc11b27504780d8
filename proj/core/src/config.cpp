#include "hypmil/config.hpp"

#include "hypmil/error.hpp"
#include "hypmil/io_util.hpp"
#include "json.hpp"

namespace hypmil {

using nlohmann::json;

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw Error(ErrorCode::kConfig, "tau must be positive");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "alpha must be positive");
  if (!(beta_ent > 0.0 && beta_ent <= 1.0)) throw Error(ErrorCode::kConfig, "beta_ent must be in (0, 1]");
  if (!(beta_con > 0.0 && beta_con <= 1.0)) throw Error(ErrorCode::kConfig, "beta_con must be in (0, 1]");
  if (lambda_a < 0.0 || lambda_s < 0.0) throw Error(ErrorCode::kConfig, "loss weights must be nonnegative");
  if (top_k < 1) throw Error(ErrorCode::kConfig, "top_k must be >= 1");
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(lr > 0.0)) throw Error(ErrorCode::kConfig, "lr must be positive");
  if (epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be >= 1");
  if (embed_dim < 2) throw Error(ErrorCode::kConfig, "k must be >= 2");
  if (!(curvature > 0.0)) throw Error(ErrorCode::kConfig, "curvature must be positive");
  if (val_every < 1) throw Error(ErrorCode::kConfig, "val_every must be >= 1");
  if (grad_accum < 1) throw Error(ErrorCode::kConfig, "grad_accum must be >= 1");
}

lorentz::GeometryConfig TrainConfig::geometry() const {
  lorentz::GeometryConfig g;
  g.curvature = curvature;
  g.dim = embed_dim;
  return g;
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

const char* const kKeys[] = {"lr",       "epochs",   "seed",    "tau",   "alpha",       "beta_ent",
                             "beta_con", "lambda_a", "lambda_s", "top_k", "shared_aggregator", "k",
                             "d_hidden", "curvature", "val_every", "grad_accum"};

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("cannot parse config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
  }
  TrainConfig c;
  read_key(j, "lr", c.lr);
  read_key(j, "epochs", c.epochs);
  read_key(j, "seed", c.seed);
  read_key(j, "tau", c.loss.tau);
  read_key(j, "alpha", c.loss.alpha);
  read_key(j, "beta_ent", c.loss.beta_ent);
  read_key(j, "beta_con", c.loss.beta_con);
  read_key(j, "lambda_a", c.loss.lambda_a);
  read_key(j, "lambda_s", c.loss.lambda_s);
  read_key(j, "top_k", c.loss.top_k);
  read_key(j, "shared_aggregator", c.shared_aggregator);
  read_key(j, "k", c.embed_dim);
  read_key(j, "d_hidden", c.hidden_dim);
  read_key(j, "curvature", c.curvature);
  read_key(j, "val_every", c.val_every);
  read_key(j, "grad_accum", c.grad_accum);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) { return parse_train_config(io::read_file(path)); }

std::string to_json(const TrainConfig& c) {
  json j = {{"lr", c.lr},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"tau", c.loss.tau},
            {"alpha", c.loss.alpha},
            {"beta_ent", c.loss.beta_ent},
            {"beta_con", c.loss.beta_con},
            {"lambda_a", c.loss.lambda_a},
            {"lambda_s", c.loss.lambda_s},
            {"top_k", c.loss.top_k},
            {"shared_aggregator", c.shared_aggregator},
            {"k", c.embed_dim},
            {"d_hidden", c.hidden_dim},
            {"curvature", c.curvature},
            {"val_every", c.val_every},
            {"grad_accum", c.grad_accum}};
  return j.dump(2);
}

}  // namespace hypmil
