#include "chaineval/volume.hpp"

#include "chaineval/text_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

namespace chaineval {

using nlohmann::json;

namespace {

const char kRemapJson[] =
#include "chaineval/embedded/remap_117_56.inc"
    ;

// Names a clinician would type that are not in the merge table.
const std::pair<const char*, const char*> kExtraSynonyms[] = {
    {"colon", "colorectum"},
    {"rectum", "colorectum"},
    {"colorectal", "colorectum"},
    {"large bowel", "colorectum"},
    {"large intestine", "colorectum"},
    {"bladder", "urinary_bladder"},
    {"gall bladder", "gallbladder"},
    {"oesophagus", "esophagus"},
    {"small intestine", "small_bowel"},
    {"thyroid", "thyroid_gland"},
    {"portal vein", "portal_vein_and_splenic_vein"},
    {"splenic vein", "portal_vein_and_splenic_vein"},
    {"hepatic", "liver"},
    {"pancreatic", "pancreas"},
    {"gastric", "stomach"},
    {"splenic", "spleen"},
    {"spinal canal", "spinal_cord"},
};

std::uint16_t read_le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string(), {{"path", path.string()}});
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

LabelVolume LabelVolume::zeros(std::size_t h, std::size_t w, std::size_t d) {
    LabelVolume v;
    v.dims = {h, w, d};
    v.voxels.assign(h * w * d, 0);
    return v;
}

void LabelVolume::validate() const {
    for (auto n : dims)
        if (n == 0) throw Error("HeaderMismatch", "volume dims must be positive", {{"dims", dims}});
    if (voxels.size() != voxel_count())
        throw Error("HeaderMismatch", "voxel count disagrees with dims",
                    {{"dims", dims}, {"voxels", voxels.size()}});
}

// ---------------------------------------------------------------------------
// Remap table
// ---------------------------------------------------------------------------

void RemapTable::validate() const {
    if (map.empty() || source_names.size() != map.size())
        throw Error("InvariantViolation", "remap table is not total over its source domain");
    std::vector<char> hit(names.size(), 0);
    for (std::size_t s = 0; s < map.size(); ++s) {
        if (map[s] >= names.size())
            throw Error("InvariantViolation", "remap target outside the merged label space",
                        {{"source", s}, {"target", map[s]}});
        hit[map[s]] = 1;
    }
    for (std::size_t m = 0; m < names.size(); ++m) {
        if (!hit[m]) throw Error("InvariantViolation", "merged label has no source", {{"merged", m}});
        if (names[m].empty()) throw Error("InvariantViolation", "merged label has no name", {{"merged", m}});
    }
    if (map[0] != 0) throw Error("InvariantViolation", "background must map to itself");
}

const RemapTable& builtin_remap_table() {
    static const RemapTable table = [] {
        auto j = json::parse(kRemapJson);
        std::size_t n_src = 0, n_merged = 0;
        for (const auto& e : j.at("entries")) {
            n_src = std::max<std::size_t>(n_src, e.at("source").get<std::size_t>() + 1);
            n_merged = std::max<std::size_t>(n_merged, e.at("merged").get<std::size_t>() + 1);
        }
        RemapTable t;
        t.map.assign(n_src, std::numeric_limits<std::uint16_t>::max());
        t.source_names.assign(n_src, "");
        t.names.assign(n_merged, "");
        for (const auto& e : j.at("entries")) {
            auto s = e.at("source").get<std::size_t>();
            auto m = e.at("merged").get<std::uint16_t>();
            t.map[s] = m;
            t.source_names[s] = e.at("source_name").get<std::string>();
            t.names[m] = e.at("merged_name").get<std::string>();
        }
        t.validate();
        if (t.domain_size() != 118 || t.image_size() != 57)
            throw Error("InvariantViolation", "builtin remap table must map 0..117 onto 0..56");
        return t;
    }();
    return table;
}

namespace {
// Fails fast at load time rather than on first use.
[[maybe_unused]] const bool kRemapChecked = (builtin_remap_table(), true);
}  // namespace

LabelVolume remap_volume(const LabelVolume& vol, const RemapTable& table) {
    vol.validate();
    std::map<std::uint16_t, std::size_t> unknown;
    LabelVolume out = vol;
    for (auto& v : out.voxels) {
        if (v >= table.map.size()) {
            ++unknown[v];
            continue;
        }
        v = table.map[v];
    }
    if (!unknown.empty()) {
        json labels = json::array();
        for (const auto& [label, count] : unknown) labels.push_back({{"label", label}, {"count", count}});
        throw Error("UnknownLabel", "volume holds labels outside the remap domain", {{"labels", labels}});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Organ names
// ---------------------------------------------------------------------------

std::string normalize_organ_name(std::string_view name) {
    std::string s(name);
    std::replace(s.begin(), s.end(), '_', ' ');
    return text::normalize_phrase(s);
}

const std::map<std::string, std::uint16_t>& organ_synonyms() {
    static const std::map<std::string, std::uint16_t> syn = [] {
        const auto& t = builtin_remap_table();
        std::map<std::string, std::uint16_t> m;
        for (std::size_t s = 0; s < t.source_names.size(); ++s) m.emplace(normalize_organ_name(t.source_names[s]), t.map[s]);
        // Merged names win over a clashing source name.
        for (std::size_t i = 0; i < t.names.size(); ++i) m[normalize_organ_name(t.names[i])] = static_cast<std::uint16_t>(i);
        for (const auto& [alias, canonical] : kExtraSynonyms) {
            auto it = m.find(normalize_organ_name(canonical));
            if (it == m.end()) throw Error("InvariantViolation", std::string("synonym target missing: ") + canonical);
            m.emplace(normalize_organ_name(alias), it->second);
        }
        m.erase("background");
        return m;
    }();
    return syn;
}

const std::string& merged_name(std::uint16_t label) {
    const auto& t = builtin_remap_table();
    if (label >= t.names.size())
        throw Error("UnknownLabel", "merged label out of range", {{"labels", json::array({{{"label", label}, {"count", 1}}})}});
    return t.names[label];
}

std::uint16_t match_organ(std::string_view name) {
    auto key = normalize_organ_name(name);
    const auto& syn = organ_synonyms();
    if (auto it = syn.find(key); it != syn.end()) return it->second;

    const auto& t = builtin_remap_table();
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (std::size_t i = 1; i < t.names.size(); ++i)
        ranked.emplace_back(text::edit_distance(key, normalize_organ_name(t.names[i])), t.names[i]);
    std::sort(ranked.begin(), ranked.end());
    json suggestions = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) suggestions.push_back(ranked[i].second);
    throw Error("UnknownOrgan", "unknown organ name: " + std::string(name),
                {{"name", std::string(name)}, {"suggestions", suggestions}});
}

// ---------------------------------------------------------------------------
// ROI
// ---------------------------------------------------------------------------

json Roi::to_json() const {
    return {{"label", label},
            {"name", merged_name(label)},
            {"bbox", {{lo[0], hi[0]}, {lo[1], hi[1]}, {lo[2], hi[2]}}},
            {"voxel_count", voxel_count}};
}

Roi extract_roi(const LabelVolume& vol, std::uint16_t label) {
    vol.validate();
    const auto [H, W, D] = vol.dims;
    Roi r;
    r.label = label;
    r.lo = {H, W, D};
    std::size_t idx = 0;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t d = 0; d < D; ++d, ++idx) {
                if (vol.voxels[idx] != label) continue;
                ++r.voxel_count;
                r.lo = {std::min(r.lo[0], h), std::min(r.lo[1], w), std::min(r.lo[2], d)};
                r.hi = {std::max(r.hi[0], h), std::max(r.hi[1], w), std::max(r.hi[2], d)};
            }
    if (r.voxel_count == 0) throw Error("EmptyRoi", "label absent from volume", {{"label", label}});
    return r;
}

LabelVolume crop_mask(const LabelVolume& vol, const Roi& roi) {
    auto out = LabelVolume::zeros(roi.hi[0] - roi.lo[0] + 1, roi.hi[1] - roi.lo[1] + 1, roi.hi[2] - roi.lo[2] + 1);
    out.spacing = vol.spacing;
    for (std::size_t h = 0; h < out.dims[0]; ++h)
        for (std::size_t w = 0; w < out.dims[1]; ++w)
            for (std::size_t d = 0; d < out.dims[2]; ++d)
                out.at(h, w, d) = vol.at(roi.lo[0] + h, roi.lo[1] + w, roi.lo[2] + d) == roi.label ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Native I/O
// ---------------------------------------------------------------------------

void write_volume(const LabelVolume& vol, const std::filesystem::path& path, std::optional<VoxelType> dtype) {
    vol.validate();
    auto max_label = vol.voxels.empty() ? 0 : *std::max_element(vol.voxels.begin(), vol.voxels.end());
    VoxelType type = dtype.value_or(max_label < 256 ? VoxelType::U8 : VoxelType::U16);
    if (type == VoxelType::U8 && max_label >= 256)
        throw Error("UnsupportedDatatype", "labels do not fit in u8", {{"max_label", max_label}});

    std::string bytes;
    bytes.reserve(vol.voxels.size() * (type == VoxelType::U8 ? 1 : 2));
    for (auto v : vol.voxels) {
        bytes.push_back(static_cast<char>(v & 0xFF));
        if (type == VoxelType::U16) bytes.push_back(static_cast<char>(v >> 8));
    }
    json side = {{"dims", vol.dims},
                 {"dtype", type == VoxelType::U8 ? "u8" : "u16"},
                 {"spacing", vol.spacing ? json(*vol.spacing) : json()}};

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + path.string(), {{"path", path.string()}});
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    std::ofstream side_out(path.string() + ".json", std::ios::trunc);
    side_out << side.dump() << '\n';
    if (!out || !side_out) throw Error("IoError", "write failed for " + path.string(), {{"path", path.string()}});
}

LabelVolume read_volume(const std::filesystem::path& path) {
    const auto name = path.string();
    if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return read_nifti(path);

    auto side_path = name + ".json";
    json side = json::parse(read_all(side_path), nullptr, false);
    if (side.is_discarded() || !side.is_object() || !side.contains("dims") || !side.contains("dtype"))
        throw Error("HeaderMismatch", "sidecar is not a {dims, dtype, spacing} object", {{"path", side_path}});

    LabelVolume vol;
    const auto& dims = side["dims"];
    if (!dims.is_array() || dims.size() != 3)
        throw Error("HeaderMismatch", "sidecar dims must hold three integers", {{"path", side_path}});
    for (std::size_t i = 0; i < 3; ++i) {
        if (!dims[i].is_number_unsigned() || dims[i].get<std::size_t>() == 0)
            throw Error("HeaderMismatch", "sidecar dims must be positive integers", {{"path", side_path}});
        vol.dims[i] = dims[i].get<std::size_t>();
    }
    auto dtype = side["dtype"].is_string() ? side["dtype"].get<std::string>() : std::string{};
    std::size_t width;
    if (dtype == "u8") width = 1;
    else if (dtype == "u16") width = 2;
    else throw Error("UnsupportedDatatype", "sidecar dtype must be u8 or u16", {{"dtype", side["dtype"]}});
    if (side.contains("spacing") && !side["spacing"].is_null()) {
        const auto& sp = side["spacing"];
        if (!sp.is_array() || sp.size() != 3)
            throw Error("HeaderMismatch", "sidecar spacing must hold three numbers", {{"path", side_path}});
        vol.spacing = std::array<double, 3>{sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    }

    auto bytes = read_all(path);
    const std::size_t expected = vol.voxel_count() * width;
    if (bytes.size() < expected)
        throw Error("TruncatedFile", "voxel file shorter than its sidecar dims",
                    {{"expected_bytes", expected}, {"actual_bytes", bytes.size()}});
    if (bytes.size() > expected)
        throw Error("HeaderMismatch", "voxel file longer than its sidecar dims",
                    {{"expected_bytes", expected}, {"actual_bytes", bytes.size()}});
    vol.voxels.resize(vol.voxel_count());
    auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < vol.voxels.size(); ++i)
        vol.voxels[i] = width == 1 ? p[i] : read_le16(p + 2 * i);
    return vol;
}

// ---------------------------------------------------------------------------
// NIfTI-1
// ---------------------------------------------------------------------------

LabelVolume read_nifti(const std::filesystem::path& path) {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (!gz) throw Error("IoError", "cannot open " + path.string(), {{"path", path.string()}});
    std::string bytes;
    char buf[1 << 16];
    int n;
    while ((n = gzread(gz, buf, sizeof buf)) > 0) bytes.append(buf, static_cast<std::size_t>(n));
    int errnum = 0;
    const char* msg = gzerror(gz, &errnum);
    std::string err = (n < 0 && msg) ? msg : "";
    gzclose(gz);
    if (n < 0) throw Error("TruncatedFile", "gzip stream is damaged: " + err, {{"path", path.string()}});

    if (bytes.size() < 348) throw Error("TruncatedFile", "file shorter than a NIfTI-1 header", {{"bytes", bytes.size()}});
    const auto* h = reinterpret_cast<const unsigned char*>(bytes.data());

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, h, 4);
    bool swap = false;
    if (sizeof_hdr != 348) {
        swap = __builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348;
        if (!swap) throw Error("HeaderMismatch", "sizeof_hdr is not 348", {{"sizeof_hdr", sizeof_hdr}});
    }
    auto i16 = [&](std::size_t off) {
        std::uint16_t v;
        std::memcpy(&v, h + off, 2);
        if (swap) v = __builtin_bswap16(v);
        return static_cast<std::int16_t>(v);
    };
    auto f32 = [&](std::size_t off) {
        std::uint32_t v;
        std::memcpy(&v, h + off, 4);
        if (swap) v = __builtin_bswap32(v);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    };

    if (std::memcmp(h + 344, "n+1\0", 4) != 0)
        throw Error("HeaderMismatch", "only single-file NIfTI-1 (magic n+1) is supported");

    const int ndim = i16(40);
    if (ndim < 3 || ndim > 7) throw Error("HeaderMismatch", "dim[0] must be between 3 and 7", {{"dim0", ndim}});
    LabelVolume vol;
    for (int i = 0; i < 3; ++i) {
        int d = i16(42 + 2 * i);
        if (d <= 0) throw Error("HeaderMismatch", "non-positive spatial dim", {{"axis", i + 1}, {"dim", d}});
        vol.dims[static_cast<std::size_t>(i)] = static_cast<std::size_t>(d);
    }
    for (int i = 3; i < ndim; ++i)
        if (i16(42 + 2 * i) > 1)
            throw Error("HeaderMismatch", "only single-frame 3-D volumes are supported", {{"dim0", ndim}});

    const int datatype = i16(70);
    std::size_t width;
    switch (datatype) {
        case 2: width = 1; break;
        case 4:
        case 512: width = 2; break;
        default:
            throw Error("UnsupportedDatatype", "NIfTI datatype " + std::to_string(datatype) + " is not supported",
                        {{"datatype", datatype}});
    }
    if (i16(72) != static_cast<int>(width * 8))
        throw Error("HeaderMismatch", "bitpix disagrees with datatype", {{"bitpix", i16(72)}, {"datatype", datatype}});
    float pix[3] = {f32(80), f32(84), f32(88)};
    if (pix[0] > 0 && pix[1] > 0 && pix[2] > 0) vol.spacing = std::array<double, 3>{pix[0], pix[1], pix[2]};

    float vox_offset = f32(108);
    if (vox_offset < 348) vox_offset = 352;
    const auto offset = static_cast<std::size_t>(vox_offset);
    const std::size_t expected = vol.voxel_count() * width;
    if (bytes.size() < offset + expected)
        throw Error("TruncatedFile", "NIfTI voxel data shorter than the header dims",
                    {{"expected_bytes", offset + expected}, {"actual_bytes", bytes.size()}});

    const auto [H, W, D] = vol.dims;
    vol.voxels.assign(vol.voxel_count(), 0);
    const unsigned char* data = h + offset;
    // NIfTI stores i fastest: file offset = i + j * H + k * H * W.
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t j = 0; j < W; ++j)
            for (std::size_t i = 0; i < H; ++i) {
                std::size_t src = i + j * H + k * H * W;
                std::uint16_t v;
                if (width == 1) {
                    v = data[src];
                } else {
                    std::uint16_t raw;
                    std::memcpy(&raw, data + 2 * src, 2);
                    if (swap) raw = __builtin_bswap16(raw);
                    if (datatype == 4 && static_cast<std::int16_t>(raw) < 0)
                        throw Error("HeaderMismatch", "negative label in int16 volume", {{"voxel", src}});
                    v = raw;
                }
                vol.voxels[vol.index(i, j, k)] = v;
            }
    return vol;
}

}  // namespace chaineval
