#include "bnpreg/session.hpp"

#include <cstdlib>
#include <set>

#include "bnpreg/descriptive.hpp"
#include "bnpreg/error.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path session_root() {
  const char* env = std::getenv("BNPREG_SESSION_ROOT");
  return env && *env ? fs::path(env) : fs::path(".");
}

// ---- JSON forms ----

namespace {

// Reads the keys of `j` into fields through `setters`, rejecting the rest.
void read_fields(const json& j, const std::string& what,
                 const std::map<std::string, std::function<void(const json&)>>& setters) {
  if (!j.is_object()) invalid("bad_" + what, what + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    const auto it = setters.find(k);
    if (it == setters.end()) invalid("unknown_field", "unknown " + what + " field '" + k + "'");
    try {
      it->second(v);
    } catch (const json::exception&) {
      invalid("bad_field", what + " field '" + k + "' has the wrong type");
    }
  }
}

template <class T>
std::function<void(const json&)> set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

json linear_json(const LinearHyper& h) {
  return {{"flat_intercept", h.flat_intercept}, {"v_beta0", h.v_beta0}, {"v_beta", h.v_beta},
          {"a0", h.a0}};
}

std::map<std::string, std::function<void(const json&)>> linear_setters(LinearHyper& h) {
  return {{"flat_intercept", set(h.flat_intercept)},
          {"v_beta0", set(h.v_beta0)},
          {"v_beta", set(h.v_beta)},
          {"a0", set(h.a0)}};
}

}  // namespace

void to_json(json& j, const ModelSpec& s) {
  json hlm = linear_json(s.hlm);
  hlm["s0"] = s.hlm.s0;
  j = {{"family", to_string(s.family)},
       {"link", to_string(s.link)},
       {"mixing", to_string(s.target)},
       {"stick",
        {{"family", to_string(s.stick.family)},
         {"alpha", s.stick.alpha},
         {"a", s.stick.a},
         {"b", s.stick.b},
         {"c", s.stick.c}}},
       {"linear", linear_json(s.linear)},
       {"hlm", hlm},
       {"ddp",
        {{"a0", s.ddp.a0},
         {"r0", s.ddp.r0},
         {"s0", s.ddp.s0},
         {"a_alpha", s.ddp.a_alpha},
         {"b_alpha", s.ddp.b_alpha},
         {"v_beta", s.ddp.v_beta},
         {"atom_gibbs", s.ddp.atom_gibbs}}},
       {"ip",
        {{"b_sigma_mu", s.ip.b_sigma_mu},
         {"v", s.ip.v},
         {"a0", s.ip.a0},
         {"v_omega", s.ip.v_omega},
         {"a_omega", s.ip.a_omega},
         {"heteroscedastic", s.ip.heteroscedastic},
         {"ssvs_kernel", s.ip.ssvs_kernel},
         {"ssvs_weights", s.ip.ssvs_weights},
         {"spike_ratio", s.ip.spike_ratio},
         {"inclusion_prob", s.ip.inclusion_prob}}}};
}

void from_json(const json& j, ModelSpec& s) {
  s = ModelSpec{};
  auto text = [](auto parse) {
    return [parse](const json& v) { parse(v.get<std::string>()); };
  };
  read_fields(
      j, "model",
      {{"family", text([&](const std::string& v) { s.family = family_from_string(v); })},
       {"link", text([&](const std::string& v) { s.link = link_from_string(v); })},
       {"mixing", text([&](const std::string& v) { s.target = mixing_target_from_string(v); })},
       {"stick",
        [&](const json& v) {
          read_fields(v, "stick",
                      {{"family", text([&](const std::string& f) {
                          s.stick.family = stick_family_from_string(f);
                        })},
                       {"alpha", set(s.stick.alpha)},
                       {"a", set(s.stick.a)},
                       {"b", set(s.stick.b)},
                       {"c", set(s.stick.c)}});
          if (s.stick.family == StickFamily::normalized_stable && !v.contains("b")) s.stick.b = 0.0;
        }},
       {"linear", [&](const json& v) { read_fields(v, "linear", linear_setters(s.linear)); }},
       {"hlm",
        [&](const json& v) {
          auto setters = linear_setters(s.hlm);
          setters["s0"] = set(s.hlm.s0);
          read_fields(v, "hlm", setters);
        }},
       {"ddp",
        [&](const json& v) {
          read_fields(v, "ddp",
                      {{"a0", set(s.ddp.a0)},
                       {"r0", set(s.ddp.r0)},
                       {"s0", set(s.ddp.s0)},
                       {"a_alpha", set(s.ddp.a_alpha)},
                       {"b_alpha", set(s.ddp.b_alpha)},
                       {"v_beta", set(s.ddp.v_beta)},
                       {"atom_gibbs", set(s.ddp.atom_gibbs)}});
        }},
       {"ip", [&](const json& v) {
          read_fields(v, "ip",
                      {{"b_sigma_mu", set(s.ip.b_sigma_mu)},
                       {"v", set(s.ip.v)},
                       {"a0", set(s.ip.a0)},
                       {"v_omega", set(s.ip.v_omega)},
                       {"a_omega", set(s.ip.a_omega)},
                       {"heteroscedastic", set(s.ip.heteroscedastic)},
                       {"ssvs_kernel", set(s.ip.ssvs_kernel)},
                       {"ssvs_weights", set(s.ip.ssvs_weights)},
                       {"spike_ratio", set(s.ip.spike_ratio)},
                       {"inclusion_prob", set(s.ip.inclusion_prob)}});
        }}});
}

void to_json(json& j, const RoleAssignment& r) {
  j = {{"dependent", r.dependent}, {"covariates", r.covariates}};
  if (r.group) j["group"] = *r.group;
  if (r.weights) j["weights"] = *r.weights;
  if (r.censor_lb) j["censor_lb"] = *r.censor_lb;
  if (r.censor_ub) j["censor_ub"] = *r.censor_ub;
}

void from_json(const json& j, RoleAssignment& r) {
  r = RoleAssignment{};
  auto opt = [](std::optional<std::string>& field) {
    return [&field](const json& v) {
      if (!v.is_null()) field = v.get<std::string>();
    };
  };
  read_fields(j, "roles",
              {{"dependent", set(r.dependent)},
               {"covariates", set(r.covariates)},
               {"group", opt(r.group)},
               {"weights", opt(r.weights)},
               {"censor_lb", opt(r.censor_lb)},
               {"censor_ub", opt(r.censor_ub)}});
}

void to_json(json& j, const TransformRecord& t) {
  j = {{"op", t.op}, {"columns", t.columns}, {"number", t.number}, {"text", t.text}};
}

void from_json(const json& j, TransformRecord& t) {
  t = TransformRecord{};
  read_fields(j, "transform",
              {{"op", set(t.op)},
               {"columns", set(t.columns)},
               {"number", set(t.number)},
               {"text", set(t.text)}});
}

// ---- session ----

namespace {

FileEntry entry_of(const std::string& content) {
  return {content.size(), hex64(fnv1a64(content))};
}

std::string manifest_text(const Manifest& m) {
  json files = json::object();
  for (const auto& [name, e] : m) files[name] = {{"length", e.length}, {"fnv1a64", e.fingerprint}};
  return json{{"format", 1}, {"files", files}}.dump(1) + "\n";
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    for (const auto& [name, e] : j.at("files").items()) {
      m[name] = {e.at("length").get<std::uint64_t>(), e.at("fnv1a64").get<std::string>()};
    }
  } catch (const json::exception&) {
    fail(ErrorKind::io, "corrupt_manifest", "the session manifest is unreadable");
  }
  return m;
}

bool append_only(const std::string& name) { return name == kSamplesFile || name == kAtomsFile; }

const std::vector<std::string>& artifact_names() {
  static const std::vector<std::string> names = {kSourceFile,  kDataFile,  kModelFile,
                                                 kSamplesFile, kAtomsFile, kFitFile};
  return names;
}

}  // namespace

Session Session::create(const fs::path& dir) {
  if (fs::exists(dir / kManifestFile)) {
    fail(ErrorKind::conflict, "session_exists", "a session already exists at " + dir.string());
  }
  Session s;
  s.dir_ = dir;
  s.persist();
  return s;
}

Session Session::open(const fs::path& dir) {
  if (!fs::exists(dir / kManifestFile)) {
    fail(ErrorKind::not_found, "unknown_session", "no session at " + dir.string());
  }
  const Manifest m = parse_manifest(read_file(dir / kManifestFile));
  std::map<std::string, std::string> content;
  for (const auto& [name, e] : m) {
    const fs::path path = dir / name;
    if (!fs::exists(path)) {
      fail(ErrorKind::io, "missing_artifact", name + " is listed in the manifest but absent");
    }
    std::string text = read_file(path);
    if (text.size() > e.length && append_only(name)) {
      text.resize(e.length);
      fs::resize_file(path, e.length);
    }
    if (entry_of(text) != e) {
      fail(ErrorKind::io, "fingerprint_mismatch", name + " does not match its recorded fingerprint");
    }
    content[name] = std::move(text);
  }
  if (!content.count(kModelFile)) fail(ErrorKind::io, "corrupt_manifest", "no model file listed");

  Session s;
  s.dir_ = dir;
  if (content.count(kSourceFile)) {
    s.source_text_ = content[kSourceFile];
    s.source_ = parse_csv(*s.source_text_);
    s.data_ = s.source_;
  }
  s.load_model_text(content[kModelFile]);
  if (content.count(kSamplesFile) != content.count(kAtomsFile)) {
    fail(ErrorKind::io, "corrupt_manifest", "samples and atoms must be stored together");
  }
  if (content.count(kSamplesFile)) s.load_samples(content[kSamplesFile], content[kAtomsFile]);
  if (s.manifest() != m) {
    fail(ErrorKind::io, "inconsistent_session", "session artifacts disagree with each other");
  }
  s.persisted_ = m;
  s.samples_dirty_ = false;
  return s;
}

const DataTable& Session::data() const {
  if (!has_data()) invalid("no_data", "no dataset has been imported");
  return data_;
}

const ModelData& Session::model_data() const {
  if (!has_data()) invalid("no_data", "no dataset has been imported");
  if (!roles_) invalid("no_roles", "variable roles have not been assigned");
  if (!spec_) invalid("no_model", "no model has been specified");
  if (!model_data_) model_data_ = build_model_data(data_, *roles_, *spec_);
  return *model_data_;
}

const ChainState& Session::chain() const {
  if (!chain_) invalid("no_draws", "the chain has not been run");
  return *chain_;
}

void Session::clear_chain() {
  chain_.reset();
  store_ = SampleStore{};
  burn_in_ = 0;
  thin_ = 1;
  seed_ = 1;
  samples_dirty_ = true;
}

void Session::reset_model_data() {
  model_data_.reset();
  clear_chain();
}

void Session::import_csv(const std::string& text, const std::string& name) {
  DataTable t = parse_csv(text, name);
  source_text_ = text;
  source_name_ = name;
  source_ = t;
  data_ = std::move(t);
  roles_.reset();
  reset_model_data();
}

void Session::transform(const TransformRecord& rec) {
  data_ = apply_transform(data(), rec);
  reset_model_data();
}

void Session::set_roles(const RoleAssignment& roles) {
  roles.validate(data());
  if (spec_) build_model_data(data_, roles, *spec_);
  if (roles_ && json(*roles_) == json(roles)) return;
  roles_ = roles;
  reset_model_data();
}

void Session::set_model(const ModelSpec& spec) {
  spec.validate();
  if (roles_ && has_data()) build_model_data(data_, *roles_, spec);
  if (spec_ && json(*spec_) == json(spec)) return;
  spec_ = spec;
  reset_model_data();
}

void Session::configure(const RoleAssignment& roles, const ModelSpec& spec) {
  roles.validate(data());
  spec.validate();
  build_model_data(data_, roles, spec);
  if (roles_ && spec_ && json(*roles_) == json(roles) && json(*spec_) == json(spec)) return;
  roles_ = roles;
  spec_ = spec;
  reset_model_data();
}

RunJob Session::prepare_run(const RunOptions& o) const {
  const ModelData& d = model_data();
  RunJob job;
  job.spec = *spec_;
  job.data = d;
  job.config.iterations = o.iterations;
  if (o.iterations == 0) invalid("bad_iterations", "iterations must be at least 1");
  if (chain_) {
    if (o.thin && *o.thin != thin_) {
      invalid("thin_fixed", "thin is fixed at " + std::to_string(thin_) + " by the first run");
    }
    if (o.seed && *o.seed != seed_) {
      invalid("seed_fixed", "the seed is fixed at " + std::to_string(seed_) + " by the first run");
    }
    job.config.thin = thin_;
    job.config.seed = seed_;
    job.burn_in = o.burn_in.value_or(burn_in_);
    job.chain = *chain_;
    job.store = store_;
  } else {
    job.config.thin = o.thin.value_or(1);
    job.config.seed = o.seed.value_or(1);
    job.burn_in = o.burn_in.value_or(0);
    if (job.burn_in >= o.iterations) {
      invalid("bad_burn_in", "burn-in must be smaller than the number of iterations");
    }
    job.config.validate();
    job.chain = init_chain(job.spec, d, job.config.seed);
    job.store = empty_store(job.spec, d);
  }
  job.config.validate();
  return job;
}

void Session::commit(const RunJob& job) {
  if (store_.n_draws() == 0) {
    store_ = job.store;
  } else {
    for (std::size_t r = store_.n_draws(); r < job.store.n_draws(); ++r) {
      const auto row = job.store.row(r);
      const auto atoms = job.store.atoms(r);
      store_.append(job.store.iteration(r), {row.begin(), row.end()}, {atoms.begin(), atoms.end()});
    }
  }
  chain_ = job.chain;
  burn_in_ = job.burn_in;
  thin_ = job.config.thin;
  seed_ = job.config.seed;
  persist();
}

RunResult execute_run(RunJob& job, const std::atomic<bool>* cancel,
                      const std::function<void(const RunJob&, std::uint64_t, std::uint64_t)>& commit) {
  RunHooks hooks;
  hooks.cancel = cancel;
  hooks.on_progress = [&](std::uint64_t done, std::uint64_t total) { commit(job, done, total); };
  const RunResult res = run_chain(job.spec, job.data, job.config, job.chain, job.store, hooks);
  if (res.cancelled || res.completed == 0) commit(job, res.completed, job.config.iterations);
  return res;
}

std::vector<SummaryRow> Session::summary(std::optional<std::uint64_t> burn_in,
                                         std::uint64_t thin) const {
  return bnpreg::summarize(store_, burn_in.value_or(burn_in_), thin);
}

FitReport Session::fit() const { return fit_report(model_data(), chain().fit); }

PosteriorDraws Session::draws(std::optional<std::uint64_t> burn_in, std::uint64_t thin) const {
  const ModelData& d = model_data();
  return load_draws(*spec_, d.p1(), d.n_groups(), store_, burn_in.value_or(burn_in_), thin);
}

PredictiveTable Session::predict(PredictiveQuery query, bool default_burn_in) const {
  if (default_burn_in) query.burn_in = burn_in_;
  return pd_functional(draws(query.burn_in, query.thin), model_data(), query);
}

std::string Session::model_text() const {
  json lineage = json::array();
  for (const auto& rec : data_.lineage()) lineage.push_back(rec);
  json j;
  j["format"] = 1;
  j["source"] = has_data() ? json{{"name", source_name_},
                                  {"fnv1a64", hex64(fnv1a64(*source_text_))}}
                           : json(nullptr);
  j["data_fnv1a64"] = has_data() ? json(hex64(fnv1a64(to_csv(data_)))) : json(nullptr);
  j["lineage"] = lineage;
  j["roles"] = roles_ ? json(*roles_) : json(nullptr);
  j["model"] = spec_ ? json(*spec_) : json(nullptr);
  j["sampler"] = {{"burn_in", burn_in_}, {"thin", thin_}, {"seed", seed_}};
  j["chain"] = chain_ ? json::parse(serialize_chain(*chain_)) : json(nullptr);
  return j.dump(1) + "\n";
}

std::string Session::fit_text() const { return fit_csv(fit(), model_data().rows); }

void Session::load_model_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    invalid("corrupt_model", "the model file is not valid JSON");
  }
  try {
    if (j.at("format").get<int>() != 1) invalid("corrupt_model", "unsupported model file format");
    const json& src = j.at("source");
    if (src.is_null() != !has_data()) {
      invalid("source_mismatch", "the model file and the session disagree on the dataset");
    }
    std::vector<TransformRecord> lineage;
    for (const auto& r : j.at("lineage")) lineage.push_back(r.get<TransformRecord>());
    std::optional<RoleAssignment> roles;
    if (!j.at("roles").is_null()) roles = j.at("roles").get<RoleAssignment>();
    std::optional<ModelSpec> spec;
    if (!j.at("model").is_null()) spec = j.at("model").get<ModelSpec>();
    if (spec) spec->validate();

    DataTable data = data_;
    if (has_data()) {
      if (src.at("fnv1a64").get<std::string>() != hex64(fnv1a64(*source_text_))) {
        invalid("source_mismatch", "the model file was made from a different dataset");
      }
      source_name_ = src.at("name").get<std::string>();
      source_ = parse_csv(*source_text_, source_name_);
      data = replay_lineage(source_, lineage);
      if (j.at("data_fnv1a64").get<std::string>() != hex64(fnv1a64(to_csv(data)))) {
        invalid("data_mismatch", "replayed transforms do not reproduce the recorded data");
      }
    }
    data_ = std::move(data);
    roles_ = roles;
    spec_ = spec;
    model_data_.reset();
    clear_chain();
    const json& sampler = j.at("sampler");
    if (!j.at("chain").is_null()) {
      chain_ = deserialize_chain(j.at("chain").dump());
      store_ = empty_store(*spec_, model_data());
      burn_in_ = sampler.at("burn_in").get<std::uint64_t>();
      thin_ = sampler.at("thin").get<std::uint64_t>();
      seed_ = sampler.at("seed").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    invalid("corrupt_model", std::string("the model file is malformed: ") + e.what());
  }
}

void Session::load_samples(const std::string& mc1, const std::string& mix) {
  if (!chain_) invalid("no_chain", "load a model file with a chain before its samples");
  SampleStore s = SampleStore::parse(mc1, mix);
  const ModelData& d = model_data();
  if (s.names() != parameter_names(*spec_, d) || s.atom_coef_names() != atom_coef_names(*spec_, d)) {
    invalid("samples_mismatch", "the samples do not belong to this model");
  }
  if (s.n_draws() > 0 && s.iteration(s.n_draws() - 1) > chain_->iteration) {
    invalid("samples_mismatch", "the samples run past the stored chain");
  }
  store_ = std::move(s);
  samples_dirty_ = true;
}

std::map<std::string, std::string> Session::artifacts() const {
  std::map<std::string, std::string> a;
  if (has_data()) {
    a[kSourceFile] = *source_text_;
    a[kDataFile] = to_csv(data_);
  }
  a[kModelFile] = model_text();
  if (chain_) {
    a[kSamplesFile] = store_.to_mc1();
    a[kAtomsFile] = store_.to_mix();
    if (chain_->fit.count > 0) a[kFitFile] = fit_text();
  }
  return a;
}

Manifest Session::manifest() const {
  Manifest m;
  for (const auto& [name, content] : artifacts()) m[name] = entry_of(content);
  return m;
}

void Session::persist() {
  fs::create_directories(dir_);
  const auto arts = artifacts();
  Manifest m;
  for (const auto& [name, content] : arts) {
    m[name] = entry_of(content);
    const fs::path path = dir_ / name;
    const auto old = persisted_.find(name);
    if (append_only(name) && !samples_dirty_ && old != persisted_.end() &&
        old->second.length <= content.size() && fs::exists(path)) {
      if (fs::file_size(path) != old->second.length) fs::resize_file(path, old->second.length);
      append_file(path, std::string_view(content).substr(old->second.length));
    } else if (old == persisted_.end() || old->second != m[name] || !fs::exists(path)) {
      write_file_atomic(path, content);
    }
  }
  for (const auto& name : artifact_names()) {
    if (!arts.count(name)) fs::remove(dir_ / name);
  }
  write_file_atomic(dir_ / kManifestFile, manifest_text(m));
  persisted_ = m;
  samples_dirty_ = false;
}

// ---- reports ----

std::string describe_csv(const DataTable& table) {
  std::string s = "column,n,missing,mean,sd,min,2.5%,25%,50%,75%,97.5%,max\n";
  for (const auto& c : table.columns()) {
    const std::size_t present = c.count_present();
    s += c.name + "," + std::to_string(present) + "," + std::to_string(c.values.size() - present);
    if (present == 0) {
      s += ",NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN\n";
      continue;
    }
    const auto u = univariate_summary(c.values);
    s += "," + format_double(u.mean) + "," +
         format_double(u.sd_defined ? u.sd : std::numeric_limits<double>::quiet_NaN()) + "," +
         format_double(u.min);
    for (double q : u.quantiles) s += "," + format_double(q);
    s += "," + format_double(u.max) + "\n";
  }
  return s;
}

json describe_model(const ModelSpec& spec, const ModelData& data) {
  return {{"model", spec},
          {"coefficients", data.coef_names},
          {"parameters", parameter_names(spec, data)},
          {"atom_coefficients", atom_coef_names(spec, data)},
          {"observations", data.n()},
          {"groups", data.n_groups()}};
}

}  // namespace bnpreg
