#pragma once

// Binary and JSON storage of TT vectors and operators.
//
// Binary record (native little-endian):
//   8-byte tag "TTVEC\0\0\0" or "TTOPR\0\0\0"
//   uint64 m, uint64 n_1..n_m, uint64 r_0..r_m
//   then core 1..m as float64, row-major within each core: (a, i, b) for a
//   vector core, (a, i, j, b) for an operator core.
// Several records may follow each other in one stream.
//
// JSON: {"kind": "tt_vector" | "tt_operator", "m", "mode_sizes", "ranks",
//        "cores": [[row-major values], ...]}

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ttmep/tt_tensor.hpp"

namespace ttmep {

namespace detail {

inline constexpr std::array<char, 8> kVectorTag{'T', 'T', 'V', 'E', 'C', 0, 0, 0};
inline constexpr std::array<char, 8> kOperatorTag{'T', 'T', 'O', 'P', 'R', 0, 0, 0};

inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ValidationError("TT binary: truncated header");
    return v;
}

inline void write_header(std::ostream& os, const std::array<char, 8>& tag, const std::vector<Index>& sizes,
                         const std::vector<Index>& ranks) {
    os.write(tag.data(), tag.size());
    write_u64(os, sizes.size());
    for (Index n : sizes) write_u64(os, static_cast<std::uint64_t>(n));
    for (Index r : ranks) write_u64(os, static_cast<std::uint64_t>(r));
}

inline void read_header(std::istream& is, const std::array<char, 8>& tag, std::vector<Index>& sizes,
                        std::vector<Index>& ranks) {
    std::array<char, 8> got{};
    is.read(got.data(), got.size());
    if (!is || got != tag) throw ValidationError("TT binary: unexpected record tag");
    const auto m = read_u64(is);
    if (m == 0 || m > 4096) throw ValidationError("TT binary: implausible order");
    sizes.resize(m);
    ranks.resize(m + 1);
    for (auto& n : sizes) n = static_cast<Index>(read_u64(is));
    for (auto& r : ranks) r = static_cast<Index>(read_u64(is));
}

inline void read_values(std::istream& is, std::span<double> out) {
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!is) throw ValidationError("TT binary: truncated core data");
}

} // namespace detail

inline void write_binary(std::ostream& os, const TTVector& v) {
    detail::write_header(os, detail::kVectorTag, v.mode_sizes(), v.ranks());
    for (const auto& c : v.cores())
        os.write(reinterpret_cast<const char*>(c.data().data()), static_cast<std::streamsize>(c.data().size_bytes()));
}

inline void write_binary(std::ostream& os, const TTOperator& A) {
    detail::write_header(os, detail::kOperatorTag, A.mode_sizes(), A.ranks());
    for (const auto& c : A.cores())
        os.write(reinterpret_cast<const char*>(c.fused().data().data()),
                 static_cast<std::streamsize>(c.fused().data().size_bytes()));
}

inline TTVector read_binary_vector(std::istream& is) {
    std::vector<Index> sizes, ranks;
    detail::read_header(is, detail::kVectorTag, sizes, ranks);
    std::vector<TensorCore> cores;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        TensorCore c(ranks[k], sizes[k], ranks[k + 1]);
        detail::read_values(is, c.data());
        cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
}

inline TTOperator read_binary_operator(std::istream& is) {
    std::vector<Index> sizes, ranks;
    detail::read_header(is, detail::kOperatorTag, sizes, ranks);
    std::vector<OperatorCore> cores;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        OperatorCore c(ranks[k], sizes[k], ranks[k + 1]);
        detail::read_values(is, c.fused().data());
        cores.push_back(std::move(c));
    }
    return TTOperator(std::move(cores));
}

inline nlohmann::json to_json(const TTVector& v) {
    nlohmann::json j;
    j["kind"] = "tt_vector";
    j["m"] = v.order();
    j["mode_sizes"] = v.mode_sizes();
    j["ranks"] = v.ranks();
    j["cores"] = nlohmann::json::array();
    for (const auto& c : v.cores()) j["cores"].push_back(std::vector<double>(c.data().begin(), c.data().end()));
    return j;
}

inline nlohmann::json to_json(const TTOperator& A) {
    nlohmann::json j;
    j["kind"] = "tt_operator";
    j["m"] = A.order();
    j["mode_sizes"] = A.mode_sizes();
    j["ranks"] = A.ranks();
    j["cores"] = nlohmann::json::array();
    for (const auto& c : A.cores())
        j["cores"].push_back(std::vector<double>(c.fused().data().begin(), c.fused().data().end()));
    return j;
}

namespace detail {

template <typename Core, typename Make>
std::vector<Core> cores_from_json(const nlohmann::json& j, const char* kind, Index per_mode_power, Make make) {
    try {
        if (j.at("kind").get<std::string>() != kind) throw ValidationError(std::string("TT json: expected kind ") + kind);
        const auto sizes = j.at("mode_sizes").get<std::vector<Index>>();
        const auto ranks = j.at("ranks").get<std::vector<Index>>();
        const auto& cores = j.at("cores");
        if (ranks.size() != sizes.size() + 1 || cores.size() != sizes.size() || j.at("m").get<std::size_t>() != sizes.size())
            throw ValidationError("TT json: inconsistent m, mode_sizes, ranks and cores");
        std::vector<Core> out;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            const auto vals = cores[k].get<std::vector<double>>();
            Index expect = ranks[k] * ranks[k + 1];
            for (Index p = 0; p < per_mode_power; ++p) expect *= sizes[k];
            if (static_cast<Index>(vals.size()) != expect) throw ValidationError("TT json: core " + std::to_string(k) + " has wrong length");
            out.push_back(make(ranks[k], sizes[k], ranks[k + 1], vals));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("TT json: ") + e.what());
    }
}

} // namespace detail

inline TTVector tt_vector_from_json(const nlohmann::json& j) {
    return TTVector(detail::cores_from_json<TensorCore>(j, "tt_vector", 1, [](Index l, Index n, Index r, const std::vector<double>& v) {
        TensorCore c(l, n, r);
        std::copy(v.begin(), v.end(), c.data().begin());
        return c;
    }));
}

inline TTOperator tt_operator_from_json(const nlohmann::json& j) {
    return TTOperator(detail::cores_from_json<OperatorCore>(j, "tt_operator", 2, [](Index l, Index n, Index r, const std::vector<double>& v) {
        OperatorCore c(l, n, r);
        std::copy(v.begin(), v.end(), c.fused().data().begin());
        return c;
    }));
}

} // namespace ttmep
