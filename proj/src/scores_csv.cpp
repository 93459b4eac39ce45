#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "morph3d/error.hpp"
#include "morph3d/matchers.hpp"

namespace morph3d {

namespace {
constexpr const char* kHeader = "probe_id,gallery_id,matcher,polarity,score";
}

void write_scores_csv(const std::vector<ScoreRecord>& records, std::ostream& out) {
  out << kHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out << r.probe_id << ',' << r.gallery_id << ',' << r.matcher << ',' << to_string(r.polarity) << ',' << buf << '\n';
  }
}

void write_scores_csv(const std::vector<ScoreRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  write_scores_csv(records, out);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

std::vector<ScoreRecord> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw Error(ErrorCode::MalformedFile, "score CSV header must be '" + std::string(kHeader) + "'");
  std::vector<ScoreRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 5) throw Error(ErrorCode::MalformedFile, "score CSV line " + std::to_string(lineno) + ": expected 5 fields");
    ScoreRecord r{f[0], f[1], f[2], Polarity::Similarity, 0.0};
    try {
      r.polarity = polarity_from_string(f[3]);
      // from_chars, not stod: stod rejects subnormals with out_of_range
      const char* end = f[4].data() + f[4].size();
      const auto [ptr, ec] = std::from_chars(f[4].data(), end, r.score);
      if (ec != std::errc() || ptr != end) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedFile, "score CSV line " + std::to_string(lineno) + ": bad polarity or score");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return read_scores_csv(in);
}

}  // namespace morph3d
