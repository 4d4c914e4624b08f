#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "slicewise/digest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  std::string cmd = std::string("\"") + SLICEWISE_CLI + "\" " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const std::string kModel = std::string(SLICEWISE_SOURCE_DIR) + "/models/lenet5.json";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("slicewise_cli_" + name);
  fs::remove_all(p);
  return p;
}

bool has(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

json load(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string l; std::getline(f, l);) ++n;
  return n;
}

}  // namespace

TEST_CASE("slice") {
  fs::path dir = scratch("slice");
  Result r = cli("slice --model " + kModel + " --preset lenet5 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  for (int k = 0; k < 5; ++k) CHECK(fs::exists(dir / ("slice_" + std::to_string(k) + ".json")));
  json manifest = load(dir / "manifest.json");
  CHECK(manifest["slices"].size() == 5);

  fs::path one = scratch("slice_one");
  CHECK(cli("slice --model " + kModel + " --plan 0-12 --out " + one.string()).code == 0);
  CHECK(fs::exists(one / "slice_0.json"));
  CHECK_FALSE(fs::exists(one / "slice_1.json"));

  Result bad = cli("slice --model " + kModel + " --plan 0-4,3-12 --out " + scratch("slice_bad").string());
  CHECK(bad.code != 0);
  CHECK(has(bad.out, "overlap"));
  fs::remove_all(dir);
  fs::remove_all(one);
}

TEST_CASE("adapt") {
  fs::path dir = scratch("adapt");
  Result r = cli("adapt --model " + kModel + " --per-slice-scales 4:20 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(fs::exists(dir / "slice_4.circuit"));
  CHECK(load(dir / "circuits.json").size() >= 1);
  CHECK(cli("adapt --model " + kModel + " --scale-bits 40 --out " + dir.string()).code != 0);
  fs::remove_all(dir);
}

TEST_CASE("run, verify and tamper") {
  fs::path dir = scratch("run");
  Result r = cli("run --model " + kModel + " --seed 4 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  fs::path run = dir / "input-0";
  int proofs = 0;
  for (const auto& e : fs::directory_iterator(run)) proofs += e.path().extension() == ".proof";
  CHECK(proofs == 5);
  json rec = load(run / "record.json");
  CHECK(rec["verified"] == true);

  Result v = cli("verify --model " + kModel + " --run " + run.string());
  CHECK_MESSAGE(v.code == 0, v.out);

  // Single-proof verification of one slice.
  fs::path circuits = scratch("run_circuits");
  CHECK(cli("adapt --model " + kModel + " --out " + circuits.string()).code == 0);
  Result one = cli("verify --circuit " + (circuits / "slice_2.circuit").string() + " --proof " +
                   (run / "slice_2.proof").string());
  CHECK_MESSAGE(one.code == 0, one.out);
  fs::path reproved = dir / "re.proof";
  CHECK(cli("prove --circuit " + (circuits / "slice_2.circuit").string() + " --witness " +
            (run / "slice_2.witness").string() + " --out " + reproved.string())
            .code == 0);
  CHECK(slicewise::read_file(reproved.string()) == slicewise::read_file((run / "slice_2.proof").string()));

  auto w = slicewise::read_file((run / "slice_2.witness").string());
  w[w.size() / 2] ^= 1;
  slicewise::write_file((run / "slice_2.witness").string(), w);
  Result bad = cli("verify --model " + kModel + " --run " + run.string());
  CHECK(bad.code != 0);
  CHECK(has(bad.out, "reject"));
  fs::remove_all(dir);
  fs::remove_all(circuits);
}

TEST_CASE("strategic run emits one proof") {
  fs::path dir = scratch("strategic");
  Result r = cli("run --model " + kModel + " --strategic 11-12 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  int proofs = 0;
  for (const auto& e : fs::directory_iterator(dir / "input-0")) proofs += e.path().extension() == ".proof";
  CHECK(proofs == 1);
  CHECK(load(dir / "input-0" / "record.json")["assurance"] == "strategically-proved");
  fs::remove_all(dir);
}

TEST_CASE("fidelity") {
  fs::path dir = scratch("fidelity");
  Result r = cli("fidelity --model " + kModel + " --count 4 --jobs 2 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(line_count(dir / "fidelity.csv") == 5);
  CHECK(load(dir / "fidelity.json")["evaluated"] == 4);

  fs::path one = scratch("fidelity_one");
  CHECK(cli("fidelity --model " + kModel + " --count 1 --out " + one.string()).code == 0);
  CHECK(load(one / "fidelity.json")["metrics"]["D1"]["sliced"]["std"] == 0.0);

  fs::path inputs = scratch("fidelity_inputs");
  fs::create_directories(inputs);
  {
    std::ofstream good(inputs / "good.json");
    json j{{"shape", {3, 32, 32}}, {"data", std::vector<double>(3 * 32 * 32, 0.25)}};
    good << j.dump();
    std::ofstream small(inputs / "small.json");
    small << json{{"shape", {2}}, {"data", {0.5, 0.5}}}.dump();
  }
  Result mixed = cli("fidelity --model " + kModel + " --input " + (inputs / "good.json").string() + " --input " +
                     (inputs / "small.json").string() + " --out " + dir.string());
  CHECK(mixed.code != 0);
  CHECK(line_count(dir / "fidelity.csv") == 3);
  CHECK(load(dir / "fidelity.json")["evaluated"] == 1);
  CHECK(has(mixed.out, "small"));
  fs::remove_all(dir);
  fs::remove_all(one);
  fs::remove_all(inputs);
}

TEST_CASE("bench") {
  fs::path dir = scratch("bench");
  Result r = cli("bench --model " + kModel + " --count 2 --interval 10 --out " + dir.string());
  CHECK_MESSAGE(r.code == 0, r.out);
  json j = load(dir / "bench.json");
  CHECK(j["environment"]["sampling_interval_ms"] == "10");
  CHECK(has(r.out, "Full Inference Proof"));
  CHECK(has(r.out, "Per-slice Proof"));
  CHECK(fs::exists(dir / "bench_time.csv"));
  CHECK(fs::exists(dir / "bench_memory.csv"));

  Result sliced = cli("bench --model " + kModel + " --config sliced --count 1 --out " + dir.string());
  CHECK(sliced.code == 0);
  CHECK_FALSE(has(sliced.out, "Full Inference"));
  fs::remove_all(dir);
}

TEST_CASE("usage errors") {
  CHECK(cli("run --model /nonexistent/model.json").code != 0);
  CHECK(cli("frobnicate").code != 0);
  Result err = cli("slice --model " + kModel + " --plan 0-3 --preset lenet5");
  CHECK(err.code != 0);
  CHECK(has(err.out, "error:"));
}
