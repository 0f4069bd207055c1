#include "spoofdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace spoofdet {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void split_labels(const ScoreSet& scores, std::vector<double>& genuine,
                  std::vector<double>& spoof) {
    for (const auto& r : scores) {
        if (!std::isfinite(r.score)) {
            throw ValidationError("non-finite score for '" + r.id + "'");
        }
        if (r.label == 0) {
            genuine.push_back(r.score);
        } else if (r.label == 1) {
            spoof.push_back(r.score);
        } else {
            throw ValidationError("label for '" + r.id + "' must be 0 or 1");
        }
    }
    if (genuine.empty() || spoof.empty()) {
        throw InsufficientDataError("both genuine and spoof records are required");
    }
}

}  // namespace

std::vector<RocPoint> roc_curve(const ScoreSet& scores) {
    std::vector<double> genuine, spoof;
    split_labels(scores, genuine, spoof);
    std::sort(genuine.begin(), genuine.end());
    std::sort(spoof.begin(), spoof.end());

    std::vector<double> thresholds;
    thresholds.reserve(scores.size() + 2);
    thresholds.push_back(-kInf);
    {
        std::vector<double> all;
        all.reserve(scores.size());
        for (const auto& r : scores) all.push_back(r.score);
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        thresholds.insert(thresholds.end(), all.begin(), all.end());
    }
    thresholds.push_back(kInf);

    std::vector<RocPoint> roc;
    roc.reserve(thresholds.size());
    double ng = static_cast<double>(genuine.size());
    double ns = static_cast<double>(spoof.size());
    for (double t : thresholds) {
        // genuine strictly above t are false acceptances (predicted spoof)
        auto above = genuine.end() - std::upper_bound(genuine.begin(), genuine.end(), t);
        // spoof at or below t are false rejections
        auto below = std::upper_bound(spoof.begin(), spoof.end(), t) - spoof.begin();
        roc.push_back({t, static_cast<double>(above) / ng, static_cast<double>(below) / ns});
    }
    return roc;
}

EerResult eer(const ScoreSet& scores) {
    std::vector<RocPoint> roc = roc_curve(scores);
    double lo = roc[1].threshold, hi = roc[roc.size() - 2].threshold;
    auto finite_threshold = [&](double t) {
        if (t == -kInf) return lo - 1.0;
        if (t == kInf) return hi + 1.0;
        return t;
    };
    for (std::size_t i = 0; i + 1 < roc.size(); ++i) {
        double d0 = roc[i].far - roc[i].frr;
        double d1 = roc[i + 1].far - roc[i + 1].frr;
        if (d0 == 0.0) {
            return {(roc[i].far + roc[i].frr) / 2.0, finite_threshold(roc[i].threshold)};
        }
        if (d0 > 0.0 && d1 <= 0.0) {
            if (d1 == 0.0) {
                return {(roc[i + 1].far + roc[i + 1].frr) / 2.0,
                        finite_threshold(roc[i + 1].threshold)};
            }
            double lambda = d0 / (d0 - d1);
            double value = roc[i].far + lambda * (roc[i + 1].far - roc[i].far);
            double t0 = finite_threshold(roc[i].threshold);
            double t1 = finite_threshold(roc[i + 1].threshold);
            return {value, t0 + lambda * (t1 - t0)};
        }
    }
    // FAR starts at 1 and FRR at 0, so a crossing always exists.
    throw NumericError("no FAR/FRR crossing found");
}

void rates_at_threshold(const ScoreSet& scores, double threshold, double& far, double& frr) {
    std::vector<double> genuine, spoof;
    split_labels(scores, genuine, spoof);
    std::int64_t fa = 0, fr = 0;
    for (double s : genuine) {
        if (s > threshold) ++fa;
    }
    for (double s : spoof) {
        if (s <= threshold) ++fr;
    }
    far = static_cast<double>(fa) / static_cast<double>(genuine.size());
    frr = static_cast<double>(fr) / static_cast<double>(spoof.size());
}

EvalReport evaluate(const ScoreSet& dev, const ScoreSet& test) {
    EerResult dev_point = eer(dev);
    EvalReport report;
    report.applied_threshold = dev_point.threshold;
    rates_at_threshold(test, dev_point.threshold, report.far, report.frr);
    report.hter = (report.far + report.frr) / 2.0;
    EerResult test_point = eer(test);
    report.eer = test_point.eer;
    report.eer_threshold = test_point.threshold;
    report.roc = roc_curve(test);
    for (const auto& r : test) {
        if (r.label == 0) {
            ++report.counts.genuine;
        } else {
            ++report.counts.spoof;
        }
    }
    return report;
}

ScoreSet aggregate_by_group(const ScoreSet& scores) {
    struct Acc {
        double sum = 0.0;
        int count = 0;
        int label = -1;
        std::string first_id;
    };
    std::vector<std::string> order;
    std::map<std::string, Acc> groups;
    for (const auto& r : scores) {
        auto [it, inserted] = groups.try_emplace(r.group);
        if (inserted) {
            order.push_back(r.group);
            it->second.label = r.label;
            it->second.first_id = r.id;
        } else if (it->second.label != r.label) {
            throw ValidationError("group '" + r.group + "' mixes genuine and spoof records");
        }
        it->second.sum += r.score;
        ++it->second.count;
    }
    ScoreSet out;
    out.reserve(order.size());
    for (const auto& g : order) {
        const Acc& a = groups.at(g);
        out.push_back({g, g, a.label, a.sum / a.count});
    }
    return out;
}

std::string EvalReport::to_json() const {
    json roc_json = json::array();
    for (const auto& p : roc) {
        json t;
        if (p.threshold == -kInf) {
            t = "-inf";
        } else if (p.threshold == kInf) {
            t = "+inf";
        } else {
            t = p.threshold;
        }
        roc_json.push_back({{"threshold", t}, {"far", p.far}, {"frr", p.frr}});
    }
    json j{{"eer", eer},
           {"eer_threshold", eer_threshold},
           {"hter", hter},
           {"applied_threshold", applied_threshold},
           {"far", far},
           {"frr", frr},
           {"counts", {{"genuine", counts.genuine}, {"spoof", counts.spoof}}},
           {"roc", roc_json}};
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    json j = json::parse(text);
    EvalReport r;
    r.eer = j.at("eer").get<double>();
    r.eer_threshold = j.at("eer_threshold").get<double>();
    r.hter = j.at("hter").get<double>();
    r.applied_threshold = j.at("applied_threshold").get<double>();
    r.far = j.at("far").get<double>();
    r.frr = j.at("frr").get<double>();
    r.counts.genuine = j.at("counts").at("genuine").get<int>();
    r.counts.spoof = j.at("counts").at("spoof").get<int>();
    for (const auto& p : j.at("roc")) {
        RocPoint pt;
        const auto& t = p.at("threshold");
        if (t.is_string()) {
            pt.threshold = t.get<std::string>() == "-inf" ? -kInf : kInf;
        } else {
            pt.threshold = t.get<double>();
        }
        pt.far = p.at("far").get<double>();
        pt.frr = p.at("frr").get<double>();
        r.roc.push_back(pt);
    }
    return r;
}

ScoreSet load_scores(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open score file " + path);
    std::string line;
    if (!std::getline(is, line)) throw ParseError(path + ": empty file, expected header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "identifier,group,label,score") {
        throw ParseError(path + ":1: bad header '" + line + "'");
    }
    ScoreSet scores;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 4) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
        }
        ScoreRecord r;
        r.id = fields[0];
        r.group = fields[1];
        if (fields[2] != "0" && fields[2] != "1") {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        }
        r.label = fields[2] == "1" ? 1 : 0;
        try {
            r.score = std::stod(fields[3]);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad score '" + fields[3] +
                             "'");
        }
        scores.push_back(std::move(r));
    }
    return scores;
}

void save_scores(const ScoreSet& scores, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "identifier,group,label,score\n";
        os.precision(17);
        for (const auto& r : scores) {
            os << r.id << "," << r.group << "," << r.label << "," << r.score << "\n";
        }
        if (!os) throw IoError("write failure on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

void save_roc_csv(const std::vector<RocPoint>& roc, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "threshold,far,frr\n";
    os.precision(17);
    for (const auto& p : roc) {
        if (p.threshold == -kInf) {
            os << "-inf";
        } else if (p.threshold == kInf) {
            os << "+inf";
        } else {
            os << p.threshold;
        }
        os << "," << p.far << "," << p.frr << "\n";
    }
}

}  // namespace spoofdet
