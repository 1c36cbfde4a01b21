#pragma once

// Deterministic ELF64 little-endian fixture builder for forensics tests.
// Emits a minimal shared-object-shaped file: NULL, .note.gnu.build-id,
// .rodata, .text, .shstrtab sections plus PT_LOAD/PT_NOTE program headers.
// Printable runs >= 4 chars exist only in .rodata, so the string extractor
// and `strings -d` agree on the content.

#include <cstdint>
#include <string>
#include <vector>

namespace mshade::testsupport {

struct ElfSpec {
    bool with_sections = true;
    bool with_note = true;
    std::vector<uint8_t> build_id = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07,
                                     0x08, 0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x0E,
                                     0x0F, 0x10, 0x11, 0x12, 0x13, 0x14};
    std::vector<std::string> rodata_strings;
};

inline std::vector<uint8_t> build_elf(const ElfSpec &spec) {
    std::vector<uint8_t> f;
    auto put8 = [&](uint8_t v) { f.push_back(v); };
    auto put16 = [&](uint16_t v) {
        put8(v & 0xFF);
        put8(v >> 8);
    };
    auto put32 = [&](uint32_t v) {
        for (int i = 0; i < 4; i++)
            put8((v >> (8 * i)) & 0xFF);
    };
    auto put64 = [&](uint64_t v) {
        for (int i = 0; i < 8; i++)
            put8((v >> (8 * i)) & 0xFF);
    };
    auto patch64 = [&](size_t off, uint64_t v) {
        for (int i = 0; i < 8; i++)
            f[off + i] = (v >> (8 * i)) & 0xFF;
    };
    auto patch16 = [&](size_t off, uint16_t v) {
        f[off] = v & 0xFF;
        f[off + 1] = v >> 8;
    };
    auto pad_to = [&](size_t align) {
        while (f.size() % align)
            put8(0);
    };

    int phnum = spec.with_note ? 2 : 1;

    // ELF header
    const uint8_t ident[16] = {0x7F, 'E', 'L', 'F', 2, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    for (uint8_t b : ident)
        put8(b);
    put16(3);    // ET_DYN
    put16(183);  // EM_AARCH64
    put32(1);    // version
    put64(0);    // entry
    put64(64);   // phoff
    put64(0);    // shoff (patched)
    put32(0);    // flags
    put16(64);   // ehsize
    put16(56);   // phentsize
    put16(static_cast<uint16_t>(phnum));
    put16(64);   // shentsize
    put16(0);    // shnum (patched)
    put16(0);    // shstrndx (patched)

    // program headers (patched once offsets are known)
    size_t phoff = f.size();
    for (int i = 0; i < phnum * 56; i++)
        put8(0);

    // note
    size_t note_off = 0, note_size = 0;
    if (spec.with_note) {
        note_off = f.size();
        put32(4);                                         // namesz
        put32(static_cast<uint32_t>(spec.build_id.size())); // descsz
        put32(3);                                         // NT_GNU_BUILD_ID
        put8('G');
        put8('N');
        put8('U');
        put8(0);
        for (uint8_t b : spec.build_id)
            put8(b);
        pad_to(4);
        note_size = f.size() - note_off;
    }

    // .rodata
    pad_to(8);
    size_t ro_off = f.size();
    for (auto &s : spec.rodata_strings) {
        for (char c : s)
            put8(static_cast<uint8_t>(c));
        put8(0);
    }
    if (spec.rodata_strings.empty())
        put8(0);
    size_t ro_size = f.size() - ro_off;

    // .text (unprintable filler)
    pad_to(8);
    size_t text_off = f.size();
    for (int i = 0; i < 16; i++)
        put8(i % 2 ? 0x90 : 0x00);
    size_t text_size = f.size() - text_off;
    size_t load_end = f.size();

    // .shstrtab
    std::string shstr;
    shstr.push_back('\0');
    size_t n_note = shstr.size();
    shstr += ".note.gnu.build-id";
    shstr.push_back('\0');
    size_t n_ro = shstr.size();
    shstr += ".rodata";
    shstr.push_back('\0');
    size_t n_text = shstr.size();
    shstr += ".text";
    shstr.push_back('\0');
    size_t n_shstr = shstr.size();
    shstr += ".shstrtab";
    shstr.push_back('\0');
    size_t shstr_off = f.size();
    for (char c : shstr)
        put8(static_cast<uint8_t>(c));

    // section headers
    pad_to(8);
    size_t shoff = f.size();
    uint16_t shnum = 0;
    auto shdr = [&](uint32_t name, uint32_t type, uint64_t flags, uint64_t off, uint64_t size) {
        put32(name);
        put32(type);
        put64(flags);
        put64(off); // addr mirrors offset; fine for a synthetic object
        put64(off);
        put64(size);
        put32(0); // link
        put32(0); // info
        put64(4); // addralign
        put64(0); // entsize
        shnum++;
    };
    if (spec.with_sections) {
        shdr(0, 0, 0, 0, 0); // SHT_NULL
        if (spec.with_note)
            shdr(static_cast<uint32_t>(n_note), 7 /*NOTE*/, 0x2 /*ALLOC*/, note_off, note_size);
        shdr(static_cast<uint32_t>(n_ro), 1 /*PROGBITS*/, 0x2 /*ALLOC*/, ro_off, ro_size);
        shdr(static_cast<uint32_t>(n_text), 1 /*PROGBITS*/, 0x2 | 0x4 /*ALLOC|EXEC*/, text_off,
             text_size);
        shdr(static_cast<uint32_t>(n_shstr), 3 /*STRTAB*/, 0, shstr_off, shstr.size());
        patch64(0x28, shoff);
        patch16(0x3C, shnum);
        patch16(0x3E, shnum - 1); // shstrndx: last section
    }

    // program headers
    auto phdr_at = [&](size_t idx, uint32_t type, uint64_t off, uint64_t size, uint32_t flags) {
        size_t base = phoff + idx * 56;
        auto w32 = [&](size_t o, uint32_t v) {
            for (int i = 0; i < 4; i++)
                f[base + o + i] = (v >> (8 * i)) & 0xFF;
        };
        auto w64 = [&](size_t o, uint64_t v) {
            for (int i = 0; i < 8; i++)
                f[base + o + i] = (v >> (8 * i)) & 0xFF;
        };
        w32(0, type);
        w32(4, flags);
        w64(8, off);   // offset
        w64(16, off);  // vaddr
        w64(24, off);  // paddr
        w64(32, size); // filesz
        w64(40, size); // memsz
        w64(48, 8);    // align
    };
    phdr_at(0, 1 /*PT_LOAD*/, 0, load_end, 0x4 /*R*/);
    if (spec.with_note)
        phdr_at(1, 4 /*PT_NOTE*/, note_off, note_size, 0x4);

    return f;
}

} // namespace mshade::testsupport
