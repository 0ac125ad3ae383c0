#include "twr/config.hpp"

#include <fstream>
#include <functional>
#include <set>

namespace twr {

using nlohmann::json;

void RunConfig::propagate_seed() {
  train.seed = seed;
  eval.seed = derive_seed(seed, "eval");
}

namespace {

/// Reads one JSON object, tracking which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  template <class Enum>
  void get_enum(const char* key, Enum& out, Enum (*parse)(std::string_view)) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void section(const char* key, const std::function<void(Section&)>& body) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section s(j_.at(key), where(key));
    body(s);
    s.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (seen_.count(k) == 0) throw ConfigError("unknown config key '" + where(k) + "'");
    }
  }

 private:
  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void validated(const char* section, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.section("data", [&](Section& s) {
    s.get("train", c.data.train);
    s.get("valid", c.data.valid);
    s.get("test", c.data.test);
    s.get("vocab_size", c.data.vocab_size);
    s.get("min_count", c.data.min_count);
    s.get("embeddings", c.data.embeddings);
  });
  root.section("model", [&](Section& s) {
    s.get_enum("cell", c.model.cell, parse_cell_family);
    s.get("embed_dim", c.model.embed_dim);
    s.get("hidden_dim", c.model.hidden_dim);
    s.get("z_dim", c.model.z_dim);
    s.get_enum("elbo_variant", c.model.variant, parse_elbo_variant);
    s.get_enum("combine_mode", c.model.combine, parse_combine_mode);
    s.get("reg_fraction", c.model.reg_fraction);
    s.get("mc_samples", c.model.mc_samples);
  });
  root.section("train", [&](Section& s) {
    s.get("learning_rate", c.train.learning_rate);
    s.get("weight_decay", c.train.weight_decay);
    s.get("batch_size", c.train.batch_size);
    s.get("epochs", c.train.epochs);
    s.get("clip_norm", c.train.clip_norm);
    s.get_enum("anneal", c.train.anneal, parse_anneal_schedule);
    s.get("anneal_cycles", c.train.anneal_cycles);
    s.get("anneal_ramp", c.train.anneal_ramp);
  });
  root.section("eval", [&](Section& s) {
    s.get_enum("nll_mode", c.eval.nll.mode, parse_nll_mode);
    s.get("iw_samples", c.eval.nll.samples);
    s.get("mi_points", c.eval.mi_points);
    s.get("mi_draws", c.eval.mi_draws);
    s.get("batch_size", c.eval.batch_size);
  });
  root.section("interpolation", [&](Section& s) {
    s.get_enum("latent_source", c.interpolation.latent_source, parse_latent_source);
    s.get("steps", c.interpolation.steps);
    s.get("pairs", c.interpolation.pairs);
    s.get("max_len", c.interpolation.max_len);
  });
  root.section("dialogue", [&](Section& s) {
    s.get("embed_dim", c.dialogue.model.embed_dim);
    s.get("hidden_dim", c.dialogue.model.hidden_dim);
    s.get("z_dim", c.dialogue.model.z_dim);
    s.get("window", c.dialogue.model.window);
    s.get("prior_hidden", c.dialogue.model.prior_hidden);
    s.get_enum("elbo_variant", c.dialogue.model.variant, parse_elbo_variant);
    s.get("learned_prior", c.dialogue.model.learned_prior);
    s.get("mc_samples", c.dialogue.model.mc_samples);
    s.get("responses", c.dialogue.responses);
    s.get("max_len", c.dialogue.max_len);
    s.get("bow_loss", c.dialogue.bow_loss);
  });
  root.finish();

  if (c.data.vocab_size <= Vocab::kSpecialCount) {
    throw ConfigError("data.vocab_size must exceed " + std::to_string(Vocab::kSpecialCount));
  }
  if (c.data.min_count < 1) throw ConfigError("data.min_count must be >= 1");
  if (c.dialogue.bow_loss) {
    throw ConfigError("dialogue.bow_loss: the bag-of-words auxiliary loss is not implemented");
  }
  const auto& m = c.model;
  if (m.embed_dim < 1 || m.hidden_dim < 1 || m.z_dim < 1) {
    throw ConfigError("model.embed_dim, model.hidden_dim and model.z_dim must be >= 1");
  }
  if (!(m.reg_fraction > 0.0 && m.reg_fraction <= 1.0)) {
    throw ConfigError("model.reg_fraction must lie in (0, 1]");
  }
  if (m.mc_samples < 1) throw ConfigError("model.mc_samples must be >= 1");
  const auto& d = c.dialogue.model;
  if (d.embed_dim < 1 || d.hidden_dim < 1 || d.z_dim < 1 || d.window < 1 || d.mc_samples < 1 ||
      d.prior_hidden < 0) {
    throw ConfigError("dialogue sizes must be positive");
  }
  if (c.dialogue.responses < 1) throw ConfigError("dialogue.responses must be >= 1");
  if (c.interpolation.steps < 1) throw ConfigError("interpolation.steps must be >= 1");
  if (c.interpolation.pairs < 1) throw ConfigError("interpolation.pairs must be >= 1");
  validated("train", [&] { c.train.validate(); });
  validated("eval", [&] { c.eval.nll.validate(); });
  if (c.eval.mi_points < 2) throw ConfigError("eval.mi_points must be >= 2");
  if (c.eval.mi_draws < 1) throw ConfigError("eval.mi_draws must be >= 1");
  if (c.eval.batch_size < 1) throw ConfigError("eval.batch_size must be >= 1");
  c.propagate_seed();
  return c;
}

json to_json(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  const auto& d = c.dialogue.model;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"data",
       {{"train", c.data.train},
        {"valid", c.data.valid},
        {"test", c.data.test},
        {"vocab_size", c.data.vocab_size},
        {"min_count", c.data.min_count},
        {"embeddings", c.data.embeddings}}},
      {"model",
       {{"cell", std::string(to_string(m.cell))},
        {"embed_dim", m.embed_dim},
        {"hidden_dim", m.hidden_dim},
        {"z_dim", m.z_dim},
        {"elbo_variant", std::string(to_string(m.variant))},
        {"combine_mode", std::string(to_string(m.combine))},
        {"reg_fraction", m.reg_fraction},
        {"mc_samples", m.mc_samples}}},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"weight_decay", t.weight_decay},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"clip_norm", t.clip_norm},
        {"anneal", std::string(to_string(t.anneal))},
        {"anneal_cycles", t.anneal_cycles},
        {"anneal_ramp", t.anneal_ramp}}},
      {"eval",
       {{"nll_mode", std::string(to_string(c.eval.nll.mode))},
        {"iw_samples", c.eval.nll.samples},
        {"mi_points", c.eval.mi_points},
        {"mi_draws", c.eval.mi_draws},
        {"batch_size", c.eval.batch_size}}},
      {"interpolation",
       {{"latent_source", std::string(to_string(c.interpolation.latent_source))},
        {"steps", c.interpolation.steps},
        {"pairs", c.interpolation.pairs},
        {"max_len", c.interpolation.max_len}}},
      {"dialogue",
       {{"embed_dim", d.embed_dim},
        {"hidden_dim", d.hidden_dim},
        {"z_dim", d.z_dim},
        {"window", d.window},
        {"prior_hidden", d.prior_hidden},
        {"elbo_variant", std::string(to_string(d.variant))},
        {"learned_prior", d.learned_prior},
        {"mc_samples", d.mc_samples},
        {"responses", c.dialogue.responses},
        {"max_len", c.dialogue.max_len},
        {"bow_loss", c.dialogue.bow_loss}}},
  };
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(c).dump(2) << '\n';
}

}  // namespace twr
