#pragma once

#include "mshade/support/result.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mshade::forensics {

// ---------------------------------------------------------------------------
// ELF inspection (64-bit little-endian only)

struct BuildId {
    std::vector<uint8_t> bytes;
    std::string hex; // lowercase
};

struct ElfError {
    bool malformed = false; // false: well-formed but no build-id note
    std::string message;
};

// Walks section headers for a SHT_NOTE holding a "GNU" build-id; falls back
// to PT_NOTE program headers when sections are stripped.
Result<BuildId, ElfError> extract_build_id(const std::vector<uint8_t> &elf);

// Maximal printable-ASCII runs (>= min_len) from allocated, non-executable
// PROGBITS sections; PT_LOAD segments when sections are absent. Matches what
// `strings -d` reports for these files.
Result<std::set<std::string>, ElfError> extract_strings(const std::vector<uint8_t> &elf,
                                                        size_t min_len = 4);

// ---------------------------------------------------------------------------
// Version schemes

enum class VersionScheme : uint8_t {
    QualcommInternal, // EV{major}.{minor}.{patch}[.{extra}]
    ArmRp,            // r{major}p{patch}
    LlvmVersion,      // {major}.{minor}.{patch}[.{commithash}]
    FingerprintMatch, // label + similarity score (unordered)
    BuildIdOnly,      // unordered
};

struct BlobVersion {
    VersionScheme scheme = VersionScheme::BuildIdOnly;
    std::vector<int> components; // qc: 3-4, arm: 2, llvm: 3
    std::string commit;          // llvm commit hash, optional
    std::string label;           // fingerprint label
    double score = 0;            // fingerprint similarity
    bool tie = false;            // fingerprint tie resolved lexicographically

    bool ordered() const {
        return scheme == VersionScheme::QualcommInternal || scheme == VersionScheme::ArmRp ||
               scheme == VersionScheme::LlvmVersion;
    }
    // comparison is defined within one ordered scheme only
    static std::optional<int> compare(const BlobVersion &a, const BlobVersion &b);
    bool equals(const BlobVersion &b) const;
    std::string to_string() const; // scheme-prefixed, e.g. "qc:31.42.23.11"
    static std::optional<BlobVersion> parse(const std::string &text);
};

// Tries Qualcomm, then ARM, then LLVM patterns over the sorted string set;
// the first match within the winning scheme is taken.
std::optional<BlobVersion> parse_version(const std::set<std::string> &strings);

struct FingerprintDb {
    std::map<std::string, std::set<std::string>> entries; // label -> distinctive strings

    static Result<FingerprintDb, std::string> load(const std::string &path);
};

// score(label) = |strings ∩ db[label]| / |db[label]|; the best label wins at
// or above the threshold, ties break to the lexicographically smaller label.
std::optional<BlobVersion> fingerprint_match(const std::set<std::string> &strings,
                                             const FingerprintDb &db, double threshold = 0.3);

// ---------------------------------------------------------------------------
// Firmware catalog and update-delay analytics

struct Date {
    int year = 1970, month = 1, day = 1;
    static std::optional<Date> parse(const std::string &iso);
    std::string to_string() const;
    int64_t days() const; // days since civil epoch
    bool operator<(const Date &o) const { return days() < o.days(); }
    bool operator==(const Date &o) const { return days() == o.days(); }
};

struct FirmwareRecord {
    std::string vendor;
    std::string device;
    std::string gpu_model;
    Date release_date;
    std::string blob_build_id; // hex
    BlobVersion blob_version;
};

Result<std::vector<FirmwareRecord>, std::string> load_catalog(const std::string &path);

struct DelayReport {
    FirmwareRecord target;
    Date r_o;            // first appearance of the target's blob
    BlobVersion v_l;     // newest version available before the target shipped
    Date r_l;            // first appearance of v_l
    int64_t delay_days = 0;
    bool outdated = false;
};

struct InsufficientData {
    std::string reason;
};

Result<DelayReport, InsufficientData> estimate_delay(const std::vector<FirmwareRecord> &catalog,
                                                     const FirmwareRecord &target);

struct VendorAggregate {
    uint64_t computable = 0;
    uint64_t outdated = 0;
    double fraction_outdated = 0;
    std::optional<double> median_delay_days; // over outdated records
    int64_t max_delay_days = 0;
};

struct DelayAggregates {
    uint64_t records = 0;
    uint64_t computable = 0;
    uint64_t skipped_insufficient = 0;
    double fraction_outdated = 0;            // over computable records
    std::optional<double> median_delay_days; // over outdated records
    int64_t max_delay_days = 0;
    std::map<std::string, VendorAggregate> by_vendor;
};

DelayAggregates aggregate_delays(const std::vector<FirmwareRecord> &catalog);

} // namespace mshade::forensics
