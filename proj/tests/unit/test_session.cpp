#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "bnpreg/session.hpp"
#include "bnpreg/text.hpp"

using namespace bnpreg;
using namespace bnpreg::testing;
namespace fs = std::filesystem;

namespace {

void run(Session& s, const RunOptions& o) {
  RunJob job = s.prepare_run(o);
  execute_run(job, nullptr, [&](const RunJob& j, std::uint64_t, std::uint64_t) { s.commit(j); });
}

Session fitted_session(const fs::path& dir, std::uint64_t iterations = 200) {
  Session s = Session::create(dir);
  s.import_csv(to_csv(general_table()));
  ModelSpec spec;
  spec.family = Family::ddp_mixture;
  s.configure(roles_for("y", {"x1", "x2"}), spec);
  RunOptions o;
  o.iterations = iterations;
  o.burn_in = 20;
  o.thin = 2;
  o.seed = 4;
  run(s, o);
  return s;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void append_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::app) << bytes;
}

}  // namespace

TEST_SUITE("session") {

TEST_CASE("empty session round trip") {
  const auto dir = scratch_dir("empty");
  const Session a = Session::create(dir);
  CHECK(fs::exists(dir / kManifestFile));
  const Session b = Session::open(dir);
  CHECK(b.manifest() == a.manifest());
  CHECK_FALSE(b.has_data());
  CHECK_FALSE(b.has_chain());
  CHECK(reason_of([&] { Session::create(dir); }) == "session_exists");
  CHECK(reason_of([&] { Session::open(dir / "nope"); }) == "unknown_session");
}

TEST_CASE("fitted session round trip") {
  const auto dir = scratch_dir("fitted");
  const Session a = fitted_session(dir);
  const Session b = Session::open(dir);
  CHECK(b.manifest() == a.manifest());
  CHECK(b.store().to_mc1() == a.store().to_mc1());
  CHECK(b.store().to_mix() == a.store().to_mix());
  CHECK(serialize_chain(b.chain()) == serialize_chain(a.chain()));
  CHECK(b.burn_in() == 20);
  CHECK(b.thin() == 2);
  CHECK(b.seed() == 4);
  CHECK(b.store().n_draws() == 100);
  CHECK(b.fit_text() == a.fit_text());
}

TEST_CASE("tampering is detected") {
  const auto dir = scratch_dir("tamper");
  fitted_session(dir);
  std::string text = read_file(dir / kDataFile);
  text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
  std::ofstream(dir / kDataFile, std::ios::binary) << text;
  CHECK(reason_of([&] { Session::open(dir); }) == "fingerprint_mismatch");
}

TEST_CASE("a torn sample tail is truncated on open") {
  const auto dir = scratch_dir("torn");
  const Session a = fitted_session(dir);
  const auto length = fs::file_size(dir / kSamplesFile);
  append_bytes(dir / kSamplesFile, "202,0.5,0.");
  append_bytes(dir / kAtomsFile, "202,1");
  const Session b = Session::open(dir);
  CHECK(b.store().n_draws() == a.store().n_draws());
  CHECK(fs::file_size(dir / kSamplesFile) == length);
  CHECK(b.manifest() == a.manifest());
}

TEST_CASE("run settings") {
  const auto dir = scratch_dir("settings");
  Session s = Session::create(dir);
  s.import_csv(to_csv(general_table()));
  s.configure(roles_for("y", {"x1"}), ModelSpec{});
  RunOptions o;
  o.iterations = 10;
  o.burn_in = 10;
  CHECK(reason_of([&] { s.prepare_run(o); }) == "bad_burn_in");
  o.iterations = 0;
  o.burn_in.reset();
  CHECK(reason_of([&] { s.prepare_run(o); }) == "bad_iterations");
  o.iterations = 10;
  o.thin = 2;
  o.seed = 3;
  run(s, o);
  CHECK(s.store().n_draws() == 5);
  o.thin = 5;
  CHECK(reason_of([&] { s.prepare_run(o); }) == "thin_fixed");
  o.thin.reset();
  o.seed = 8;
  CHECK(reason_of([&] { s.prepare_run(o); }) == "seed_fixed");
  o.seed.reset();
  run(s, o);
  CHECK(s.chain().iteration == 20);
  CHECK(s.store().n_draws() == 10);
}

TEST_CASE("model and samples re-upload reproduce the session") {
  const auto dir = scratch_dir("origin");
  const Session a = fitted_session(dir);
  Session b = Session::create(scratch_dir("copy"));
  b.import_csv(read_file(dir / kSourceFile));
  b.load_model_text(read_file(dir / kModelFile));
  b.load_samples(read_file(dir / kSamplesFile), read_file(dir / kAtomsFile));
  CHECK(b.manifest() == a.manifest());

  Session other = Session::create(scratch_dir("other"));
  other.import_csv("y,x\n1,2\n3,4\n");
  CHECK(reason_of([&] { other.load_model_text(read_file(dir / kModelFile)); }) == "source_mismatch");
  Session c = Session::create(scratch_dir("copy2"));
  c.import_csv(read_file(dir / kSourceFile));
  CHECK(reason_of([&] { c.load_samples(read_file(dir / kSamplesFile), read_file(dir / kAtomsFile)); }) ==
        "no_chain");
}

TEST_CASE("spec and roles JSON") {
  ModelSpec spec;
  spec.family = Family::infinite_probits;
  spec.ip.heteroscedastic = true;
  nlohmann::json j = spec;
  const ModelSpec back = j.get<ModelSpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK(reason_of([] { nlohmann::json{{"colour", 1}}.get<ModelSpec>(); }) == "unknown_field");
  const auto stable = nlohmann::json::parse(R"({"stick":{"family":"normalized_stable","a":0.4}})").get<ModelSpec>();
  CHECK(stable.stick.b == 0.0);
  CHECK_NOTHROW(stable.stick.validate());

  RoleAssignment r = roles_for("y", {"a", "b"});
  r.group = "g";
  nlohmann::json rj = r;
  CHECK(rj.at("group") == "g");
  CHECK(nlohmann::json(rj.get<RoleAssignment>()) == rj);
}

TEST_CASE("describe") {
  const DataTable t("t", {{"a", {1, 2, 3}}, {"b", {kNaN, kNaN, kNaN}}});
  const auto lines = split_lines(describe_csv(t));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "column,n,missing,mean,sd,min,2.5%,25%,50%,75%,97.5%,max");
  CHECK(lines[1].rfind("a,3,0,2,1,1,", 0) == 0);
  CHECK(lines[2].rfind("b,0,3,NaN", 0) == 0);
}

}  // TEST_SUITE
