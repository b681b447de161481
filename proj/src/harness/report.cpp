#include <algorithm>
#include <sstream>

#include "parp/error.hpp"
#include "parp/harness/harness.hpp"

namespace parp::harness {

using analytics::format_double;

namespace {

bool wildcard_match(std::string_view pat, std::string_view s) {
  // iterative * / ? matcher with single backtrack point
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
      ++p;
      ++i;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

bool has_wildcard(const std::string& s) { return s.find_first_of("*?") != std::string::npos; }

void expand(const std::filesystem::path& base, std::vector<std::string>::const_iterator part,
            std::vector<std::string>::const_iterator end, std::vector<std::filesystem::path>& out) {
  if (part == end) {
    if (std::filesystem::is_regular_file(base)) out.push_back(base);
    return;
  }
  if (!has_wildcard(*part)) {
    const auto next = base / *part;
    if (std::filesystem::exists(next)) expand(next, part + 1, end, out);
    return;
  }
  std::error_code ec;
  const auto dir = base.empty() ? std::filesystem::path(".") : base;
  if (!std::filesystem::is_directory(dir, ec)) return;
  std::vector<std::filesystem::path> names;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec))
    if (wildcard_match(*part, e.path().filename().string())) names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  for (const auto& n : names) expand(base / n, part + 1, end, out);
}

}  // namespace

std::vector<std::filesystem::path> glob_records(const std::string& pattern) {
  std::filesystem::path p(pattern);
  // A directory stands for the records directly inside it.
  if (!has_wildcard(pattern) && std::filesystem::is_directory(p)) p /= "record.json";
  std::vector<std::string> parts;
  std::filesystem::path base;
  if (p.has_root_path()) base = p.root_path();
  for (const auto& c : p.relative_path()) parts.push_back(c.string());
  std::vector<std::filesystem::path> out;
  expand(base, parts.begin(), parts.end(), out);
  return out;
}

Report report(const std::string& pattern) {
  Report rep;
  std::ostringstream runs, metrics, traj;
  runs << "method,sparsity,seed,discovery_runs,runs_consumed,total_update_steps\n";
  metrics << "method,sparsity,seed,task,final_dev,final_test\n";
  traj << "method,sparsity,seed,event,iou\n";
  for (const auto& path : glob_records(pattern)) {
    const RunRecord r = read_record(path);
    ++rep.records;
    // composite records only point at their children
    if (!r.children.empty() || r.kind == "pretrain" || r.kind == "iou-report" || r.kind == "transfer-matrix" ||
        r.kind == "ablation" || r.kind == "sweep")
      continue;
    const std::string s = format_double(r.sparsity);
    runs << r.method << ',' << s << ',' << r.seed << ',' << r.discovery_runs << ',' << r.runs_consumed << ','
         << r.total_update_steps << '\n';
    metrics << r.method << ',' << s << ',' << r.seed << ',' << r.task << ',' << format_double(r.final_dev.loss)
            << ',' << format_double(r.final_test.loss) << '\n';
    for (std::size_t e = 0; e < r.trajectory.size(); ++e)
      traj << r.method << ',' << s << ',' << r.seed << ',' << e + 1 << ',' << format_double(r.trajectory[e])
           << '\n';
  }
  rep.runs_csv = runs.str();
  rep.metrics_csv = metrics.str();
  rep.trajectory_csv = traj.str();
  return rep;
}

}  // namespace parp::harness
