#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "morph3d/error.hpp"
#include "morph3d/experiment.hpp"

namespace morph3d {

using ojson = nlohmann::ordered_json;

std::string manifest_to_json(const Manifest& m) {
  ojson j;
  j["format"] = "morph3d.manifest";
  j["version"] = Manifest::kVersion;
  j["experiment"] = m.experiment;
  auto pairs = [](const std::vector<std::pair<std::string, std::string>>& v) {
    ojson a = ojson::array();
    for (const auto& [p, g] : v) a.push_back({p, g});
    return a;
  };
  j["genuine"] = pairs(m.genuine);
  j["impostor"] = pairs(m.impostor);
  ojson morphs = ojson::array();
  for (const auto& mm : m.morphs) {
    morphs.push_back({{"id", mm.id},
                      {"subjects", {mm.subjects[0], mm.subjects[1]}},
                      {"sources", {mm.sources[0], mm.sources[1]}},
                      {"mated", {mm.mated[0], mm.mated[1]}}});
  }
  j["morphs"] = std::move(morphs);
  return j.dump(1);
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "morph3d.manifest") {
      throw Error(ErrorCode::MalformedFile, "not a morph3d manifest");
    }
    if (j.at("version").get<int>() != Manifest::kVersion) {
      throw Error(ErrorCode::MalformedFile, "unsupported manifest version");
    }
    m.experiment = j.value("experiment", "");
    for (const auto& p : j.at("genuine")) m.genuine.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    for (const auto& p : j.at("impostor")) m.impostor.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    for (const auto& e : j.at("morphs")) {
      ManifestMorph mm;
      mm.id = e.at("id").get<std::string>();
      for (int i = 0; i < 2; ++i) {
        mm.subjects[i] = e.at("subjects").at(i).get<std::string>();
        mm.sources[i] = e.value("sources", nlohmann::json::array({"", ""})).at(i).get<std::string>();
        mm.mated[i] = e.at("mated").at(i).get<std::vector<std::string>>();
      }
      m.morphs.push_back(std::move(mm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

std::vector<std::pair<std::string, TrialSet>> assemble_trials(const std::vector<ScoreRecord>& records,
                                                              const Manifest& manifest) {
  auto key = [](const std::string& a, const std::string& b) { return a + '\x1f' + b; };
  std::set<std::string> genuine, impostor;
  for (const auto& [p, g] : manifest.genuine) genuine.insert(key(p, g));
  for (const auto& [p, g] : manifest.impostor) impostor.insert(key(p, g));
  // morph id -> (manifest index, gallery id -> side)
  std::map<std::string, std::pair<std::size_t, std::map<std::string, int>>> morphs;
  for (std::size_t i = 0; i < manifest.morphs.size(); ++i) {
    auto& entry = morphs[manifest.morphs[i].id];
    entry.first = i;
    for (int side = 0; side < 2; ++side)
      for (const auto& g : manifest.morphs[i].mated[side]) entry.second.emplace(g, side);
  }

  std::map<std::string, TrialSet> sets;
  for (const auto& r : records) {
    auto [it, fresh] = sets.try_emplace(r.matcher);
    TrialSet& ts = it->second;
    if (fresh) {
      ts.polarity = r.polarity;
      for (const auto& mm : manifest.morphs) ts.morphs.push_back({mm.id, mm.subjects, {}});
    } else if (ts.polarity != r.polarity) {
      throw Error(ErrorCode::MalformedFile, "matcher '" + r.matcher + "' mixes polarities");
    }
    if (auto m = morphs.find(r.probe_id); m != morphs.end()) {
      auto side = m->second.second.find(r.gallery_id);
      if (side == m->second.second.end()) {
        throw Error(ErrorCode::MalformedFile, "score " + r.probe_id + " vs " + r.gallery_id + " is not a mated comparison");
      }
      ts.morphs[m->second.first].mated_scores[side->second].push_back(r.score);
    } else if (genuine.count(key(r.probe_id, r.gallery_id))) {
      ts.genuine.push_back(r.score);
    } else if (impostor.count(key(r.probe_id, r.gallery_id))) {
      ts.impostor.push_back(r.score);
    } else {
      throw Error(ErrorCode::MalformedFile, "score " + r.probe_id + " vs " + r.gallery_id + " is not in the manifest");
    }
  }
  return {sets.begin(), sets.end()};
}

MetricsReport evaluate_trials(const TrialSet& trials, const std::string& matcher, double fmr_target,
                              std::optional<double> tau, int bins) {
  if (trials.genuine.empty() || trials.impostor.empty()) {
    throw Error(ErrorCode::EmptyScoreSet, "matcher '" + matcher + "' has no genuine or no impostor scores");
  }
  const double t = tau ? *tau : calibrate_threshold(trials.genuine, trials.impostor, fmr_target, trials.polarity);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto widen = [&](const std::vector<double>& v) {
    for (double s : v) {
      if (!std::isfinite(s)) continue;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  };
  widen(trials.genuine);
  widen(trials.impostor);
  for (const auto& m : trials.morphs) {
    widen(m.mated_scores[0]);
    widen(m.mated_scores[1]);
  }
  if (trials.polarity == Polarity::Similarity) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  } else {
    lo = 0.0;
  }
  if (!(hi > lo)) hi = lo + 1.0;
  return evaluate(trials, t, bins, lo, hi, matcher);
}

namespace {

ojson histogram_json(const Histogram& h) {
  return {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}, {"underflow", h.underflow}, {"overflow", h.overflow}};
}

}  // namespace

std::string metrics_report_to_json(const MetricsReport& r) {
  ojson j;
  j["matcher"] = r.matcher;
  j["polarity"] = to_string(r.polarity);
  j["tau"] = r.tau;
  j["fmr"] = r.fmr;
  j["fnmr"] = r.fnmr;
  j["mmpmr"] = r.mmpmr;
  j["rmmr"] = r.rmmr;
  j["n_genuine"] = r.n_genuine;
  j["n_impostor"] = r.n_impostor;
  j["n_morphs"] = r.n_morphs;
  j["n_successful_morphs"] = r.n_successful_morphs;
  j["histograms"] = {{"genuine", histogram_json(r.genuine_hist)},
                     {"impostor", histogram_json(r.impostor_hist)},
                     {"morph", histogram_json(r.morph_hist)}};
  return j.dump(2);
}

std::string histogram_svg(const MetricsReport& r, const std::string& title) {
  constexpr double W = 600, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  const Histogram* hs[3] = {&r.genuine_hist, &r.impostor_hist, &r.morph_hist};
  const char* names[3] = {"genuine", "impostor", "morph"};
  const char* colors[3] = {"#2a9d3f", "#d62828", "#1f5fbf"};
  // Fractions per bin so populations of different size share one axis.
  double ymax = 0.0;
  std::vector<double> frac[3];
  for (int k = 0; k < 3; ++k) {
    std::size_t total = 0;
    for (auto c : hs[k]->counts) total += c;
    for (auto c : hs[k]->counts) {
      frac[k].push_back(total ? static_cast<double>(c) / static_cast<double>(total) : 0.0);
      ymax = std::max(ymax, frac[k].back());
    }
  }
  if (ymax <= 0.0) ymax = 1.0;
  const double lo = r.genuine_hist.lo, hi = r.genuine_hist.hi;
  auto px = [&](double x) { return L + (x - lo) / (hi - lo) * pw; };
  auto py = [&](double y) { return T + ph - y / ymax * ph; };
  char buf[256];
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"400\" viewBox=\"0 0 600 400\">\n";
  s += "<rect width=\"600\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"300\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">" + title + "</text>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"#444\"/>\n", L, T,
                pw, ph);
  s += buf;
  for (int k = 0; k < 3; ++k) {
    const auto& h = *hs[k];
    const double bw = (hi - lo) / static_cast<double>(h.counts.size());
    std::string pts;
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", px(lo), py(0.0));
    pts += buf;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double x0 = lo + static_cast<double>(i) * bw, x1 = x0 + bw;
      std::snprintf(buf, sizeof buf, " %.2f,%.2f %.2f,%.2f", px(x0), py(frac[k][i]), px(x1), py(frac[k][i]));
      pts += buf;
    }
    std::snprintf(buf, sizeof buf, " %.2f,%.2f", px(hi), py(0.0));
    pts += buf;
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(colors[k]) + "\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                  W - R - 80, T + 16 + 16 * k, colors[k], names[k]);
    s += buf;
  }
  if (r.tau >= lo && r.tau <= hi) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-dasharray=\"5,4\"/>\n",
                  px(r.tau), T, px(r.tau), T + ph);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">%s score "
                "(tau = %.6g)</text>\n",
                L + pw / 2, H - 14, r.matcher.c_str(), r.tau);
  s += buf;
  for (int i = 0; i <= 4; ++i) {
    const double x = lo + (hi - lo) * i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">%.4g</text>\n",
                  px(x), T + ph + 16, x);
    s += buf;
    const double y = ymax * i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%.3f</text>\n",
                  L - 6, py(y) + 4, y);
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace morph3d
