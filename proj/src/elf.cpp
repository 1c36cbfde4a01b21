#include "mshade/forensics/forensics.hpp"

#include <cstring>

namespace mshade::forensics {

namespace {

// ELF64 little-endian layout constants
constexpr size_t kEhdrSize = 64;
constexpr uint32_t kShtNote = 7;
constexpr uint32_t kShtProgbits = 1;
constexpr uint32_t kPtNote = 4;
constexpr uint32_t kPtLoad = 1;
constexpr uint64_t kShfAlloc = 0x2;
constexpr uint64_t kShfExecinstr = 0x4;
constexpr uint32_t kNtGnuBuildId = 3;

struct Reader {
    const std::vector<uint8_t> &d;

    bool in_range(size_t off, size_t len) const {
        return off + len >= off && off + len <= d.size();
    }
    uint16_t u16(size_t off) const {
        return static_cast<uint16_t>(d[off] | (d[off + 1] << 8));
    }
    uint32_t u32(size_t off) const {
        return static_cast<uint32_t>(d[off]) | (static_cast<uint32_t>(d[off + 1]) << 8) |
               (static_cast<uint32_t>(d[off + 2]) << 16) |
               (static_cast<uint32_t>(d[off + 3]) << 24);
    }
    uint64_t u64(size_t off) const {
        return static_cast<uint64_t>(u32(off)) | (static_cast<uint64_t>(u32(off + 4)) << 32);
    }
};

struct Header {
    uint64_t shoff, phoff;
    uint16_t shentsize, shnum, phentsize, phnum;
};

Result<Header, ElfError> check_header(const std::vector<uint8_t> &elf) {
    if (elf.size() < kEhdrSize)
        return ElfError{true, "truncated: shorter than an ELF64 header"};
    if (!(elf[0] == 0x7F && elf[1] == 'E' && elf[2] == 'L' && elf[3] == 'F'))
        return ElfError{true, "bad magic"};
    if (elf[4] != 2)
        return ElfError{true, "32-bit ELF; only ELF64 is supported"};
    if (elf[5] != 1)
        return ElfError{true, "big-endian ELF; only little-endian is supported"};
    Reader r{elf};
    Header h;
    h.phoff = r.u64(0x20);
    h.shoff = r.u64(0x28);
    h.phentsize = r.u16(0x36);
    h.phnum = r.u16(0x38);
    h.shentsize = r.u16(0x3A);
    h.shnum = r.u16(0x3C);
    return h;
}

struct Region {
    uint64_t offset;
    uint64_t size;
};

// Scans note entries within a file region for the GNU build-id descriptor.
std::optional<std::vector<uint8_t>> scan_notes(const Reader &r, Region reg) {
    uint64_t off = reg.offset;
    uint64_t end = reg.offset + reg.size;
    while (off + 12 <= end && r.in_range(off, 12)) {
        uint32_t namesz = r.u32(off);
        uint32_t descsz = r.u32(off + 4);
        uint32_t type = r.u32(off + 8);
        uint64_t name_off = off + 12;
        uint64_t desc_off = name_off + ((namesz + 3) & ~3u);
        uint64_t next = desc_off + ((descsz + 3) & ~3u);
        if (!r.in_range(name_off, namesz) || !r.in_range(desc_off, descsz))
            return std::nullopt;
        if (type == kNtGnuBuildId && namesz == 4 &&
            std::memcmp(r.d.data() + name_off, "GNU\0", 4) == 0) {
            return std::vector<uint8_t>(r.d.begin() + desc_off,
                                        r.d.begin() + desc_off + descsz);
        }
        if (next <= off)
            return std::nullopt;
        off = next;
    }
    return std::nullopt;
}

std::string to_hex(const std::vector<uint8_t> &bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        s += digits[b >> 4];
        s += digits[b & 0xF];
    }
    return s;
}

} // namespace

Result<BuildId, ElfError> extract_build_id(const std::vector<uint8_t> &elf) {
    auto hr = check_header(elf);
    if (!hr.ok())
        return hr.error();
    Header h = hr.value();
    Reader r{elf};

    // section headers first
    for (uint16_t i = 0; i < h.shnum; i++) {
        size_t sh = h.shoff + static_cast<size_t>(i) * h.shentsize;
        if (!r.in_range(sh, 64))
            return ElfError{true, "truncated section header table"};
        uint32_t type = r.u32(sh + 0x4);
        if (type != kShtNote)
            continue;
        uint64_t off = r.u64(sh + 0x18);
        uint64_t size = r.u64(sh + 0x20);
        if (!r.in_range(off, size))
            return ElfError{true, "note section outside the file"};
        if (auto bytes = scan_notes(r, {off, size})) {
            BuildId id;
            id.bytes = *bytes;
            id.hex = to_hex(id.bytes);
            return id;
        }
    }
    // fallback: PT_NOTE program headers (stripped section tables)
    for (uint16_t i = 0; i < h.phnum; i++) {
        size_t ph = h.phoff + static_cast<size_t>(i) * h.phentsize;
        if (!r.in_range(ph, 56))
            return ElfError{true, "truncated program header table"};
        uint32_t type = r.u32(ph);
        if (type != kPtNote)
            continue;
        uint64_t off = r.u64(ph + 0x8);
        uint64_t size = r.u64(ph + 0x20);
        if (!r.in_range(off, size))
            return ElfError{true, "note segment outside the file"};
        if (auto bytes = scan_notes(r, {off, size})) {
            BuildId id;
            id.bytes = *bytes;
            id.hex = to_hex(id.bytes);
            return id;
        }
    }
    return ElfError{false, "no .note.gnu.build-id present"};
}

Result<std::set<std::string>, ElfError> extract_strings(const std::vector<uint8_t> &elf,
                                                        size_t min_len) {
    auto hr = check_header(elf);
    if (!hr.ok())
        return hr.error();
    Header h = hr.value();
    Reader r{elf};

    std::vector<Region> regions;
    for (uint16_t i = 0; i < h.shnum; i++) {
        size_t sh = h.shoff + static_cast<size_t>(i) * h.shentsize;
        if (!r.in_range(sh, 64))
            return ElfError{true, "truncated section header table"};
        uint32_t type = r.u32(sh + 0x4);
        uint64_t flags = r.u64(sh + 0x8);
        if (type != kShtProgbits || !(flags & kShfAlloc) || (flags & kShfExecinstr))
            continue;
        uint64_t off = r.u64(sh + 0x18);
        uint64_t size = r.u64(sh + 0x20);
        if (!r.in_range(off, size))
            return ElfError{true, "section data outside the file"};
        regions.push_back({off, size});
    }
    if (h.shnum == 0) {
        for (uint16_t i = 0; i < h.phnum; i++) {
            size_t ph = h.phoff + static_cast<size_t>(i) * h.phentsize;
            if (!r.in_range(ph, 56))
                return ElfError{true, "truncated program header table"};
            if (r.u32(ph) != kPtLoad)
                continue;
            uint64_t off = r.u64(ph + 0x8);
            uint64_t size = r.u64(ph + 0x20); // filesz
            if (!r.in_range(off, size))
                return ElfError{true, "segment data outside the file"};
            regions.push_back({off, size});
        }
    }

    std::set<std::string> out;
    for (auto &reg : regions) {
        std::string run;
        for (uint64_t i = 0; i <= reg.size; i++) {
            uint8_t c = i < reg.size ? elf[reg.offset + i] : 0;
            if (c >= 0x20 && c <= 0x7E) {
                run += static_cast<char>(c);
            } else {
                if (run.size() >= min_len)
                    out.insert(run);
                run.clear();
            }
        }
    }
    return out;
}

} // namespace mshade::forensics
