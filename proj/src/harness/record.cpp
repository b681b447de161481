#include "parp/harness/record.hpp"

#include <sstream>

#include "parp/analytics/analytics.hpp"
#include "parp/binary_io.hpp"
#include "parp/error.hpp"

namespace parp::harness {

using analytics::format_double;

json RunRecord::to_json() const {
  json j;
  j["config_digest"] = config_digest;
  j["code_version"] = code_version;
  j["kind"] = kind;
  j["method"] = method;
  j["task"] = task;
  j["seed"] = seed;
  j["sparsity"] = sparsity;
  j["final_dev"] = {{"loss", final_dev.loss}, {"error_rate", final_dev.error_rate}};
  j["final_test"] = {{"loss", final_test.loss}, {"error_rate", final_test.error_rate}};
  j["mask_paths"] = mask_paths;
  j["mask_sha256"] = mask_sha256;
  j["discovery_runs"] = discovery_runs;
  j["runs_consumed"] = runs_consumed;
  j["total_update_steps"] = total_update_steps;
  j["trajectory"] = trajectory;
  j["wall_time_s"] = wall_time_s;
  j["children"] = children;
  j["extra"] = extra;
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.config_digest = j.at("config_digest").get<std::string>();
    r.code_version = j.at("code_version").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.sparsity = j.at("sparsity").get<double>();
    r.final_dev = {j.at("final_dev").at("loss").get<double>(), j.at("final_dev").at("error_rate").get<double>()};
    r.final_test = {j.at("final_test").at("loss").get<double>(),
                    j.at("final_test").at("error_rate").get<double>()};
    r.mask_paths = j.at("mask_paths").get<std::vector<std::string>>();
    r.mask_sha256 = j.at("mask_sha256").get<std::vector<std::string>>();
    r.discovery_runs = j.at("discovery_runs").get<int>();
    r.runs_consumed = j.at("runs_consumed").get<int>();
    r.total_update_steps = j.at("total_update_steps").get<std::int64_t>();
    r.trajectory = j.at("trajectory").get<std::vector<double>>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.children = j.at("children").get<std::vector<std::string>>();
    r.extra = j.value("extra", json::object());
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  return r;
}

void write_record(const RunRecord& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "record.json", r.to_json().dump(2) + "\n");
}

RunRecord read_record(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return RunRecord::from_json(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string steps_csv(const methods::Trace& t) {
  std::ostringstream out;
  out << "step,lr,train_loss\n";
  for (const auto& s : t.steps)
    out << s.step << ',' << format_double(s.lr) << ',' << format_double(s.train_loss) << '\n';
  return out.str();
}

std::string evals_csv(const methods::Trace& t) {
  std::ostringstream out;
  out << "step,dev_loss,dev_error\n";
  for (const auto& e : t.evals)
    out << e.step << ',' << format_double(e.dev_loss) << ',' << format_double(e.dev_error) << '\n';
  return out.str();
}

}  // namespace parp::harness
