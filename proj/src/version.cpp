#include "mshade/forensics/forensics.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace mshade::forensics {

namespace {

const std::regex kQualcommRe(R"(EV?\d+(\.\d+){2,3})");
const std::regex kArmRe(R"(r(\d+)p(\d+))");
// llvm version strings carry a commit hash, or an explicit "LLVM" marker
const std::regex kLlvmCommitRe(R"((\d+)\.(\d+)\.(\d+)\.([0-9a-fA-F]{6,40}))");
const std::regex kLlvmMarkedRe(R"(LLVM[ -](\d+)\.(\d+)\.(\d+))");

std::vector<int> split_components(const std::string &dotted) {
    std::vector<int> out;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.'))
        out.push_back(std::atoi(part.c_str()));
    return out;
}

} // namespace

std::optional<int> BlobVersion::compare(const BlobVersion &a, const BlobVersion &b) {
    if (a.scheme != b.scheme || !a.ordered())
        return std::nullopt;
    // componentwise; a missing component compares as 0
    size_t n = std::max(a.components.size(), b.components.size());
    for (size_t i = 0; i < n; i++) {
        int av = i < a.components.size() ? a.components[i] : 0;
        int bv = i < b.components.size() ? b.components[i] : 0;
        if (av != bv)
            return av < bv ? -1 : 1;
    }
    return 0;
}

bool BlobVersion::equals(const BlobVersion &b) const {
    if (scheme != b.scheme)
        return false;
    if (ordered())
        return compare(*this, b) == 0;
    if (scheme == VersionScheme::FingerprintMatch)
        return label == b.label;
    return true; // BuildIdOnly: the build id itself lives on the record
}

std::string BlobVersion::to_string() const {
    std::string s;
    switch (scheme) {
    case VersionScheme::QualcommInternal: {
        s = "qc:";
        for (size_t i = 0; i < components.size(); i++) {
            if (i)
                s += ".";
            s += std::to_string(components[i]);
        }
        return s;
    }
    case VersionScheme::ArmRp:
        return "arm:r" + std::to_string(components.size() > 0 ? components[0] : 0) + "p" +
               std::to_string(components.size() > 1 ? components[1] : 0);
    case VersionScheme::LlvmVersion: {
        s = "llvm:";
        for (size_t i = 0; i < components.size(); i++) {
            if (i)
                s += ".";
            s += std::to_string(components[i]);
        }
        if (!commit.empty())
            s += "." + commit;
        return s;
    }
    case VersionScheme::FingerprintMatch:
        return "fp:" + label;
    case VersionScheme::BuildIdOnly:
        return "buildid";
    }
    return "?";
}

std::optional<BlobVersion> BlobVersion::parse(const std::string &text) {
    BlobVersion v;
    auto starts = [&](const char *p) {
        return text.rfind(p, 0) == 0;
    };
    if (starts("qc:")) {
        v.scheme = VersionScheme::QualcommInternal;
        v.components = split_components(text.substr(3));
        if (v.components.size() < 3 || v.components.size() > 4)
            return std::nullopt;
        for (int c : v.components)
            if (c < 0)
                return std::nullopt;
        return v;
    }
    if (starts("arm:")) {
        std::smatch m;
        std::string rest = text.substr(4);
        if (!std::regex_match(rest, m, kArmRe))
            return std::nullopt;
        v.scheme = VersionScheme::ArmRp;
        v.components = {std::atoi(m[1].str().c_str()), std::atoi(m[2].str().c_str())};
        return v;
    }
    if (starts("llvm:")) {
        v.scheme = VersionScheme::LlvmVersion;
        std::string rest = text.substr(5);
        // optional trailing commit hash after the third component
        std::smatch m;
        if (std::regex_match(rest, m, kLlvmCommitRe)) {
            v.components = {std::atoi(m[1].str().c_str()), std::atoi(m[2].str().c_str()),
                            std::atoi(m[3].str().c_str())};
            v.commit = m[4].str();
            return v;
        }
        v.components = split_components(rest);
        if (v.components.size() != 3)
            return std::nullopt;
        return v;
    }
    if (starts("fp:")) {
        v.scheme = VersionScheme::FingerprintMatch;
        v.label = text.substr(3);
        if (v.label.empty())
            return std::nullopt;
        return v;
    }
    if (text == "buildid") {
        v.scheme = VersionScheme::BuildIdOnly;
        return v;
    }
    return std::nullopt;
}

std::optional<BlobVersion> parse_version(const std::set<std::string> &strings) {
    // sets iterate sorted, so "first match" is deterministic
    for (const auto &s : strings) {
        std::smatch m;
        if (std::regex_search(s, m, kQualcommRe)) {
            std::string matched = m[0].str();
            size_t digits = matched.find_first_of("0123456789");
            BlobVersion v;
            v.scheme = VersionScheme::QualcommInternal;
            v.components = split_components(matched.substr(digits));
            return v;
        }
    }
    for (const auto &s : strings) {
        std::smatch m;
        if (std::regex_search(s, m, kArmRe)) {
            BlobVersion v;
            v.scheme = VersionScheme::ArmRp;
            v.components = {std::atoi(m[1].str().c_str()), std::atoi(m[2].str().c_str())};
            return v;
        }
    }
    for (const auto &s : strings) {
        std::smatch m;
        if (std::regex_search(s, m, kLlvmCommitRe)) {
            BlobVersion v;
            v.scheme = VersionScheme::LlvmVersion;
            v.components = {std::atoi(m[1].str().c_str()), std::atoi(m[2].str().c_str()),
                            std::atoi(m[3].str().c_str())};
            v.commit = m[4].str();
            return v;
        }
        if (std::regex_search(s, m, kLlvmMarkedRe)) {
            BlobVersion v;
            v.scheme = VersionScheme::LlvmVersion;
            v.components = {std::atoi(m[1].str().c_str()), std::atoi(m[2].str().c_str()),
                            std::atoi(m[3].str().c_str())};
            return v;
        }
    }
    return std::nullopt;
}

Result<FingerprintDb, std::string> FingerprintDb::load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        return std::string("cannot open fingerprint db: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return std::string("fingerprint db must be a JSON object of label -> string list");
    FingerprintDb db;
    for (auto &[label, arr] : j.items()) {
        if (!arr.is_array() || arr.empty())
            return std::string("fingerprint entry '" + label + "' must be a non-empty array");
        std::set<std::string> set;
        for (auto &s : arr) {
            if (!s.is_string())
                return std::string("fingerprint entry '" + label + "' holds a non-string");
            set.insert(s.get<std::string>());
        }
        db.entries[label] = std::move(set);
    }
    return db;
}

std::optional<BlobVersion> fingerprint_match(const std::set<std::string> &strings,
                                             const FingerprintDb &db, double threshold) {
    std::optional<std::string> best_label;
    double best_score = -1;
    bool tie = false;
    for (auto &[label, needles] : db.entries) {
        size_t hits = 0;
        for (auto &n : needles)
            if (strings.count(n))
                hits++;
        double score = static_cast<double>(hits) / static_cast<double>(needles.size());
        if (score > best_score) {
            best_score = score;
            best_label = label;
            tie = false;
        } else if (score == best_score) {
            tie = true; // labels iterate sorted, so the first stays
        }
    }
    if (!best_label || best_score < threshold)
        return std::nullopt;
    BlobVersion v;
    v.scheme = VersionScheme::FingerprintMatch;
    v.label = *best_label;
    v.score = best_score;
    v.tie = tie;
    return v;
}

} // namespace mshade::forensics
