#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Nothing here calls into the library's algorithms; the
// point is to recompute the same quantities a different, simpler way.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// CoT_e in exact integer arithmetic
// ---------------------------------------------------------------------------

/// Weighted score in thousandths of a point for inputs given in hundredths
/// and weights given in tenths (3, 3, 4 for the default weighting).
inline long long cot_e_milli(long long fc_cents, long long ic_cents, long long lrc_cents, int w_fc = 3, int w_ic = 3,
                             int w_lrc = 4) {
    return w_fc * fc_cents + w_ic * ic_cents + w_lrc * lrc_cents;  // cents * tenths = thousandths
}

/// Half-even rounding of a thousandths value to hundredths.
inline long long round_milli_to_cents(long long milli) {
    long long q = milli / 10, r = milli % 10;
    if (r > 5 || (r == 5 && (q % 2 != 0))) ++q;
    return q;
}

// ---------------------------------------------------------------------------
// Knowledge-graph neighbourhood by fixed-point relaxation
// ---------------------------------------------------------------------------

struct ToyEdge {
    std::string s;
    std::string r;
    std::string o;
    std::string scope;
};

/// Indices of edges (admitted by scope) that touch a node whose undirected
/// distance from a seed is <= hops, where distances only travel along
/// admitted edges. Distances come from repeated relaxation over the whole
/// edge list until nothing changes.
inline std::set<std::size_t> khop_edges(const std::vector<ToyEdge>& edges, const std::set<std::string>& seeds,
                                        const std::set<std::string>& allowed, std::size_t hops) {
    constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
    std::map<std::string, std::size_t> dist;
    for (const auto& e : edges) dist[e.s] = dist[e.o] = inf;
    for (const auto& s : seeds)
        if (dist.count(s)) dist[s] = 0;
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& e : edges) {
            if (!allowed.count(e.scope)) continue;
            auto& a = dist[e.s];
            auto& b = dist[e.o];
            if (a != inf && a + 1 < b) b = a + 1, changed = true;
            if (b != inf && b + 1 < a) a = b + 1, changed = true;
        }
    }
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!allowed.count(edges[i].scope)) continue;
        if (dist[edges[i].s] <= hops || dist[edges[i].o] <= hops) out.insert(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Volumes
// ---------------------------------------------------------------------------

struct Box {
    std::uint16_t label = 0;
    std::array<std::size_t, 3> lo{};
    std::array<std::size_t, 3> hi{};
    std::size_t count = 0;
};

/// Bounding box by scanning every voxel with plain nested loops; count 0
/// means absent. `voxels` is row-major (H, W, D).
inline Box full_scan(const std::vector<std::uint16_t>& voxels, std::array<std::size_t, 3> dims, std::uint16_t label) {
    Box b;
    b.label = label;
    b.lo = {dims[0], dims[1], dims[2]};
    std::size_t i = 0;
    for (std::size_t h = 0; h < dims[0]; ++h)
        for (std::size_t w = 0; w < dims[1]; ++w)
            for (std::size_t d = 0; d < dims[2]; ++d, ++i) {
                if (voxels[i] != label) continue;
                ++b.count;
                std::array<std::size_t, 3> p{h, w, d};
                for (int k = 0; k < 3; ++k) {
                    b.lo[k] = std::min(b.lo[k], p[k]);
                    b.hi[k] = std::max(b.hi[k], p[k]);
                }
            }
    return b;
}

inline std::map<std::uint16_t, std::size_t> histogram(const std::vector<std::uint16_t>& voxels) {
    std::map<std::uint16_t, std::size_t> h;
    for (auto v : voxels) ++h[v];
    return h;
}

/// Histogram of a remapped volume predicted from the source histogram alone.
inline std::map<std::uint16_t, std::size_t> push_histogram(const std::map<std::uint16_t, std::size_t>& source,
                                                            const std::vector<std::uint16_t>& map) {
    std::map<std::uint16_t, std::size_t> out;
    for (const auto& [label, n] : source) out[map.at(label)] += n;
    return out;
}

/// Random labels with a few dense blobs so boxes are not trivially the whole volume.
inline std::vector<std::uint16_t> random_sparse_labels(std::mt19937_64& rng, std::array<std::size_t, 3> dims,
                                                       std::uint16_t max_label, double density) {
    std::vector<std::uint16_t> v(dims[0] * dims[1] * dims[2], 0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> lab(1, max_label);
    for (auto& x : v)
        if (coin(rng) < density) x = static_cast<std::uint16_t>(lab(rng));
    return v;
}

// ---------------------------------------------------------------------------
// NIfTI-1 writer (test-side only; the library reads but never writes NIfTI)
// ---------------------------------------------------------------------------

/// Writes a single-file NIfTI-1 image with dim = {3, nx, ny, nz}; `data` is
/// in file order (x fastest). `raw` is the already-encoded voxel bytes.
inline std::string nifti_bytes(std::array<int, 3> n, std::int16_t datatype, std::int16_t bitpix,
                               const std::string& raw, std::array<float, 3> pixdim = {1.f, 1.f, 1.f},
                               bool big_endian = false) {
    std::string hdr(352, '\0');
    auto put = [&](std::size_t off, const void* p, std::size_t len) {
        std::memcpy(&hdr[off], p, len);
        if (big_endian) std::reverse(hdr.begin() + static_cast<long>(off), hdr.begin() + static_cast<long>(off + len));
    };
    std::int32_t sizeof_hdr = 348;
    put(0, &sizeof_hdr, 4);
    std::int16_t dim[8] = {3, static_cast<std::int16_t>(n[0]), static_cast<std::int16_t>(n[1]),
                           static_cast<std::int16_t>(n[2]), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put(40 + 2 * i, &dim[i], 2);
    put(70, &datatype, 2);
    put(72, &bitpix, 2);
    float pix[8] = {1.f, pixdim[0], pixdim[1], pixdim[2], 0, 0, 0, 0};
    for (int i = 0; i < 8; ++i) put(76 + 4 * i, &pix[i], 4);
    float vox_offset = 352.f;
    put(108, &vox_offset, 4);
    std::memcpy(&hdr[344], "n+1\0", 4);
    return hdr + raw;
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void write_gz(const std::filesystem::path& p, const std::string& bytes) {
    gzFile f = gzopen(p.string().c_str(), "wb");
    if (!f) throw std::runtime_error("gzopen failed");
    gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
}

/// Little-endian u16 encoding of labels laid out x-fastest from an (H, W, D)
/// row-major array, treating x = h, y = w, z = d.
inline std::string encode_u16_xfast(const std::vector<std::uint16_t>& hwd, std::array<std::size_t, 3> dims,
                                    bool big_endian = false) {
    std::string out;
    for (std::size_t d = 0; d < dims[2]; ++d)
        for (std::size_t w = 0; w < dims[1]; ++w)
            for (std::size_t h = 0; h < dims[0]; ++h) {
                auto v = hwd[(h * dims[1] + w) * dims[2] + d];
                char lo = static_cast<char>(v & 0xff), hi = static_cast<char>(v >> 8);
                if (big_endian) out += hi, out += lo;
                else out += lo, out += hi;
            }
    return out;
}

// ---------------------------------------------------------------------------
// Temporary directories
// ---------------------------------------------------------------------------

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("chaineval-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
