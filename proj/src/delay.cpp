#include "mshade/forensics/forensics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mshade::forensics {

std::optional<Date> Date::parse(const std::string &iso) {
    int y, m, d;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        return std::nullopt;
    if (m < 1 || m > 12 || d < 1 || d > 31 || y < 1)
        return std::nullopt;
    static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    int dim = mdays[m - 1] + (m == 2 && leap ? 1 : 0);
    if (d > dim)
        return std::nullopt;
    return Date{y, m, d};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

// Howard Hinnant's days-from-civil
int64_t Date::days() const {
    int y = year - (month <= 2);
    int era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<int64_t>(era) * 146097 + static_cast<int64_t>(doe) - 719468;
}

Result<std::vector<FirmwareRecord>, std::string> load_catalog(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        return std::string("cannot open catalog: " + path);
    std::vector<FirmwareRecord> out;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        lineno++;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ','))
            fields.push_back(f);
        if (!header_seen) {
            header_seen = true;
            if (line != "vendor,device,gpu_model,release_date,blob_build_id,blob_version")
                return std::string(path + ":1: unexpected CSV header");
            continue;
        }
        if (fields.size() != 6)
            return std::string(path + ":" + std::to_string(lineno) + ": expected 6 fields");
        FirmwareRecord r;
        r.vendor = fields[0];
        r.device = fields[1];
        r.gpu_model = fields[2];
        if (r.gpu_model.empty())
            return std::string(path + ":" + std::to_string(lineno) + ": empty gpu_model");
        auto date = Date::parse(fields[3]);
        if (!date)
            return std::string(path + ":" + std::to_string(lineno) + ": bad date '" +
                               fields[3] + "'");
        r.release_date = *date;
        r.blob_build_id = fields[4];
        auto ver = BlobVersion::parse(fields[5]);
        if (!ver)
            return std::string(path + ":" + std::to_string(lineno) + ": bad version '" +
                               fields[5] + "'");
        r.blob_version = *ver;
        out.push_back(std::move(r));
    }
    if (out.empty())
        return std::string(path + ": catalog lists no records");
    return out;
}

Result<DelayReport, InsufficientData> estimate_delay(const std::vector<FirmwareRecord> &catalog,
                                                     const FirmwareRecord &target) {
    // r_o: the oldest firmware shipping the same blob (by build id)
    std::optional<Date> r_o;
    for (auto &r : catalog)
        if (r.blob_build_id == target.blob_build_id)
            if (!r_o || r.release_date < *r_o)
                r_o = r.release_date;
    if (!r_o)
        r_o = target.release_date;

    // candidates: same GPU model, released strictly before the target
    std::vector<const FirmwareRecord *> candidates;
    for (auto &r : catalog)
        if (r.gpu_model == target.gpu_model && r.release_date < target.release_date)
            candidates.push_back(&r);
    if (candidates.empty())
        return InsufficientData{"no earlier firmware with gpu model '" + target.gpu_model + "'"};

    // v_l: newest version available by then; the target's own version is in
    // the running (a target already shipping the newest is current)
    if (!target.blob_version.ordered())
        return InsufficientData{"target version scheme has no ordering"};
    BlobVersion v_l = target.blob_version;
    for (auto *r : candidates) {
        auto cmp = BlobVersion::compare(v_l, r->blob_version);
        if (!cmp)
            return InsufficientData{"version schemes are not comparable within gpu model '" +
                                    target.gpu_model + "'"};
        if (*cmp < 0)
            v_l = r->blob_version;
    }

    // r_l: earliest firmware carrying v_l
    std::optional<Date> r_l;
    for (auto &r : catalog)
        if (r.blob_version.equals(v_l))
            if (!r_l || r.release_date < *r_l)
                r_l = r.release_date;
    if (!r_l)
        r_l = target.release_date;

    DelayReport rep;
    rep.target = target;
    rep.r_o = *r_o;
    rep.v_l = v_l;
    rep.r_l = *r_l;
    int64_t d = r_l->days() - r_o->days();
    rep.delay_days = d < 0 ? 0 : d; // catalog inconsistencies clamp to zero
    rep.outdated = !v_l.equals(target.blob_version);
    if (!rep.outdated)
        rep.delay_days = 0;
    return rep;
}

namespace {

std::optional<double> median_of(std::vector<int64_t> v) {
    if (v.empty())
        return std::nullopt;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n % 2 == 1)
        return static_cast<double>(v[n / 2]);
    return (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

} // namespace

DelayAggregates aggregate_delays(const std::vector<FirmwareRecord> &catalog) {
    DelayAggregates agg;
    agg.records = catalog.size();
    std::vector<int64_t> outdated_delays;
    std::map<std::string, std::vector<int64_t>> vendor_delays;
    std::map<std::string, uint64_t> vendor_computable;

    for (auto &rec : catalog) {
        auto rep = estimate_delay(catalog, rec);
        if (!rep.ok()) {
            agg.skipped_insufficient++;
            continue;
        }
        agg.computable++;
        vendor_computable[rec.vendor]++;
        const DelayReport &r = rep.value();
        if (r.outdated) {
            outdated_delays.push_back(r.delay_days);
            vendor_delays[rec.vendor].push_back(r.delay_days);
            agg.max_delay_days = std::max(agg.max_delay_days, r.delay_days);
        }
    }
    agg.fraction_outdated = agg.computable
                                ? static_cast<double>(outdated_delays.size()) /
                                      static_cast<double>(agg.computable)
                                : 0.0;
    agg.median_delay_days = median_of(outdated_delays);

    for (auto &[vendor, computable] : vendor_computable) {
        VendorAggregate va;
        va.computable = computable;
        auto it = vendor_delays.find(vendor);
        if (it != vendor_delays.end()) {
            va.outdated = it->second.size();
            va.median_delay_days = median_of(it->second);
            for (int64_t d : it->second)
                va.max_delay_days = std::max(va.max_delay_days, d);
        }
        va.fraction_outdated =
            computable ? static_cast<double>(va.outdated) / static_cast<double>(computable) : 0;
        agg.by_vendor[vendor] = va;
    }
    return agg;
}

} // namespace mshade::forensics
