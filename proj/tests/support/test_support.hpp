#pragma once

// Helpers shared by the unit and acceptance suites: scratch directories,
// CLI invocation and brute-force reference scorers written independently
// of the library code.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(FBKIT_TEST_DATA); }
inline fs::path fixture(const std::string& rel) { return data_dir() / "fixtures" / rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag = "fbkit") {
        std::string tmpl = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr, interleaved
};

/// Runs the fbkit binary with `args` (already shell-quoted where needed).
inline CommandResult run_cli(const std::string& args) {
    std::string cmd = std::string("'") + FBKIT_CLI + "' " + args + " 2>&1";
    CommandResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
    int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------- oracles

/// Plain re-implementation of the analyzer contract for ASCII input:
/// lowercase alphanumeric runs, minus stopwords, stemmed by `stem`.
template <typename Stem>
std::vector<std::string> oracle_terms(const std::string& text, const std::set<std::string>& stop,
                                      Stem&& stem) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !stop.contains(cur)) out.push_back(stem(cur));
        cur.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
            flush();
    }
    flush();
    return out;
}

/// Exhaustive BM25: loops over every (document, query term) pair and
/// recounts tf and df from the raw term lists.
struct OracleBM25 {
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> docs;

    std::vector<std::pair<std::string, double>> rank(const std::map<std::string, double>& query,
                                                     double k1, double b) const {
        const double n = static_cast<double>(docs.size());
        double total = 0;
        for (const auto& d : docs) total += static_cast<double>(d.size());
        const double avgdl = total / n;
        std::vector<std::pair<std::string, double>> scored;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            double score = 0;
            bool matched = false;
            for (const auto& [term, weight] : query) {
                double tf = 0;
                for (const auto& t : docs[i])
                    if (t == term) tf += 1;
                if (tf == 0 || weight <= 0) continue;
                double df = 0;
                for (const auto& d : docs) {
                    for (const auto& t : d) {
                        if (t == term) {
                            df += 1;
                            break;
                        }
                    }
                }
                const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
                const double len = static_cast<double>(docs[i].size());
                score += weight * idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
                matched = true;
            }
            if (matched) scored.emplace_back(ids[i], score);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;
            return x.first < y.first;
        });
        return scored;
    }
};

/// Average precision by definition: mean of precision at each relevant hit.
inline double oracle_ap(const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
    if (relevant.empty()) return 0;
    double sum = 0;
    int hits = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (relevant.contains(ranking[i])) {
            ++hits;
            sum += hits / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(relevant.size());
}

/// Sample t statistic mean(d) / (sd(d) / sqrt(n)), two-pass.
inline double oracle_t(const std::vector<double>& d) {
    double mean = 0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(d.size());
    double var = 0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(d.size() - 1);
    return mean / (std::sqrt(var) / std::sqrt(static_cast<double>(d.size())));
}

}  // namespace testing_support
