#include "qkd/opsets.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kPhaseAlignTol = 1e-9;

Mat letter_matrix(const std::string& letter, double theta) {
    if (letter == "I") return Mat::identity(2);
    if (letter == "X") return Mat::from_rows({{0, 1}, {1, 0}});
    if (letter == "Z") return Mat::from_rows({{1, 0}, {0, -1}});
    if (letter == "H") return Mat::from_rows({{kInvSqrt2, kInvSqrt2}, {kInvSqrt2, -kInvSqrt2}});
    if (letter == "H1") return Mat::from_rows({{kInvSqrt2, cx(0, -kInvSqrt2)}, {cx(0, kInvSqrt2), -kInvSqrt2}});
    if (letter == "H2") return Mat::from_rows({{1, 0}, {0, cx(0, 1)}});
    if (letter == "H3") return Mat::from_rows({{kInvSqrt2, kInvSqrt2}, {cx(0, kInvSqrt2), cx(0, -kInvSqrt2)}});
    if (letter == "H4") return Mat::from_rows({{kInvSqrt2, cx(0, -kInvSqrt2)}, {kInvSqrt2, cx(0, kInvSqrt2)}});
    if (letter == "U") {
        const double c = std::cos(theta), s = std::sin(theta);
        return Mat::from_rows({{c, s}, {s, -c}});
    }
    throw std::invalid_argument("unknown operator letter: " + letter);
}

std::vector<std::string> tokenize_word(const std::string& word) {
    std::vector<std::string> letters;
    for (size_t i = 0; i < word.size(); ++i) {
        if (word[i] == 'H' && i + 1 < word.size() && word[i + 1] >= '1' && word[i + 1] <= '4') {
            letters.push_back(word.substr(i, 2));
            ++i;
        } else {
            letters.push_back(word.substr(i, 1));
        }
    }
    return letters;
}

// Does op send `from` onto `to` up to a phase? Reports the index permutation.
std::optional<int> aligned_parity(const Mat& op, const MeasurementBasis& from, const MeasurementBasis& to) {
    const CVec w0 = op * from.vector(0).amplitudes();
    const CVec w1 = op * from.vector(1).amplitudes();
    const auto aligned = [](const CVec& a, const PureState& b) {
        return 1.0 - std::norm(inner(b.amplitudes(), a)) <= kPhaseAlignTol;
    };
    if (aligned(w0, to.vector(0)) && aligned(w1, to.vector(1))) return 0;
    if (aligned(w0, to.vector(1)) && aligned(w1, to.vector(0))) return 1;
    return std::nullopt;
}

}  // namespace

std::string to_string(CatalogKind kind) {
    switch (kind) {
        case CatalogKind::Bb84Four: return "bb84-4";
        case CatalogKind::Bb84Eight: return "bb84-8";
        case CatalogKind::SixState24: return "six-state-24";
        case CatalogKind::General12: return "general-12";
    }
    return "?";
}

std::optional<CatalogKind> catalog_kind_from_string(const std::string& name) {
    if (name == "bb84-4") return CatalogKind::Bb84Four;
    if (name == "bb84-8") return CatalogKind::Bb84Eight;
    if (name == "six-state-24") return CatalogKind::SixState24;
    if (name == "general-12") return CatalogKind::General12;
    return std::nullopt;
}

std::string to_string(CodingMode mode) {
    return mode == CodingMode::FixedPerOperator ? "fixed-per-operator" : "flip-parity";
}

std::optional<CodingMode> coding_mode_from_string(const std::string& name) {
    if (name == "fixed-per-operator") return CodingMode::FixedPerOperator;
    if (name == "flip-parity") return CodingMode::FlipParityPerCell;
    return std::nullopt;
}

CodingMode default_coding(CatalogKind kind) {
    // Fixed coding is only well defined for the four-operator catalog; the
    // richer catalogs contain operators that are indistinguishable on some
    // cells yet would carry different fixed bits.
    return kind == CatalogKind::Bb84Four ? CodingMode::FixedPerOperator : CodingMode::FlipParityPerCell;
}

Unitary operator_from_word(const std::string& word, double theta) {
    if (word.empty()) throw std::invalid_argument("empty operator word");
    Mat m = Mat::identity(2);
    for (const std::string& letter : tokenize_word(word)) m = m * letter_matrix(letter, theta);
    return Unitary(std::move(m));
}

OperatorCatalog OperatorCatalog::build(CatalogKind kind, std::optional<double> theta) {
    OperatorCatalog cat;
    cat.kind_ = kind;

    std::vector<std::string> labels;
    switch (kind) {
        case CatalogKind::Bb84Four:
            labels = {"Z", "X", "H", "HXZ"};
            cat.bases_ = {MeasurementBasis::z(), MeasurementBasis::x()};
            break;
        case CatalogKind::Bb84Eight:
            labels = {"I", "X", "Z", "XZ", "H", "HX", "HZ", "HXZ"};
            cat.bases_ = {MeasurementBasis::z(), MeasurementBasis::x()};
            break;
        case CatalogKind::SixState24:
            for (const char* prefix : {"I", "H", "H1", "H2", "H3", "H4"}) {
                for (const char* suffix : {"I", "X", "Z", "XZ"}) {
                    std::string label = std::string(prefix == std::string("I") ? "" : prefix) +
                                        (suffix == std::string("I") ? "" : suffix);
                    if (label.empty()) label = "I";
                    labels.push_back(label);
                }
            }
            cat.bases_ = {MeasurementBasis::z(), MeasurementBasis::x(), MeasurementBasis::y()};
            break;
        case CatalogKind::General12:
            if (!theta) throw std::invalid_argument("general-12 catalog requires theta");
            labels = {"I", "U", "XZ", "UXZ", "X", "Z", "UX", "UZ", "XU", "ZU", "UXU", "UZU"};
            cat.theta_ = *theta;
            cat.bases_ = {MeasurementBasis::z(), MeasurementBasis::general(*theta)};
            break;
    }
    if (kind != CatalogKind::General12 && theta) {
        throw std::invalid_argument("theta is only meaningful for the general-12 catalog");
    }

    for (const std::string& label : labels) {
        cat.entries_.push_back({label, operator_from_word(label, cat.theta_)});
    }

    const int nb = static_cast<int>(cat.bases_.size());
    cat.images_.resize(cat.entries_.size());
    cat.targets_.resize(cat.entries_.size());
    for (size_t k = 0; k < cat.entries_.size(); ++k) {
        cat.images_[k].resize(static_cast<size_t>(nb));
        for (int src = 0; src < nb; ++src) {
            for (int dst = 0; dst < nb; ++dst) {
                const auto parity = aligned_parity(cat.entries_[k].op.matrix(), cat.bases_[static_cast<size_t>(src)],
                                                   cat.bases_[static_cast<size_t>(dst)]);
                if (parity) {
                    cat.images_[k][static_cast<size_t>(src)] = {dst, *parity};
                    break;
                }
            }
        }
        for (int dst = 0; dst < nb; ++dst) {
            bool reachable = false;
            for (int src = 0; src < nb; ++src) {
                reachable = reachable || (cat.images_[k][static_cast<size_t>(src)].target == dst);
            }
            if (reachable) cat.targets_[k].push_back(dst);
        }
    }
    return cat;
}

const CatalogEntry& OperatorCatalog::entry(const std::string& label) const {
    const int i = index_of(label);
    if (i < 0) throw std::invalid_argument("operator not in catalog: " + label);
    return entries_[static_cast<size_t>(i)];
}

int OperatorCatalog::index_of(const std::string& label) const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].label == label) return static_cast<int>(i);
    return -1;
}

int OperatorCatalog::basis_index(const MeasurementBasis& b) const {
    for (size_t i = 0; i < bases_.size(); ++i)
        if (bases_[i] == b) return static_cast<int>(i);
    return -1;
}

std::optional<int> OperatorCatalog::image(int op_index, int source_basis) const {
    return images_.at(static_cast<size_t>(op_index)).at(static_cast<size_t>(source_basis)).target;
}

int OperatorCatalog::parity(int op_index, int source_basis) const {
    const ImageCell& cell = images_.at(static_cast<size_t>(op_index)).at(static_cast<size_t>(source_basis));
    if (!cell.target) {
        throw std::invalid_argument("operator " + entries_[static_cast<size_t>(op_index)].label +
                                    " has no basis image on source basis " +
                                    bases_[static_cast<size_t>(source_basis)].name());
    }
    return cell.parity;
}

const std::vector<int>& OperatorCatalog::valid_targets(int op_index) const {
    return targets_.at(static_cast<size_t>(op_index));
}

std::optional<MeasurementBasis> basis_image(const OperatorCatalog& catalog, const std::string& label,
                                            const MeasurementBasis& source) {
    const int op = catalog.index_of(label);
    if (op < 0) throw std::invalid_argument("operator not in catalog: " + label);
    const int src = catalog.basis_index(source);
    if (src < 0) throw std::invalid_argument("source is not a protocol basis");
    const auto target = catalog.image(op, src);
    if (!target) return std::nullopt;
    return catalog.bases()[static_cast<size_t>(*target)];
}

int flip_parity(const OperatorCatalog& catalog, const std::string& label, const MeasurementBasis& source,
                const MeasurementBasis& target) {
    const int op = catalog.index_of(label);
    const int src = catalog.basis_index(source);
    const int dst = catalog.basis_index(target);
    if (op < 0 || src < 0 || dst < 0) throw std::invalid_argument("flip_parity: label or basis not in catalog");
    if (catalog.image(op, src) != std::optional<int>(dst)) {
        throw std::invalid_argument("flip_parity: cell (" + source.name() + " -> " + target.name() +
                                    ") is invalid for operator " + label);
    }
    return catalog.parity(op, src);
}

std::array<int, 3> prefix_permutation(const std::string& prefix) {
    static const std::vector<std::string> known = {"I", "H", "H1", "H2", "H3", "H4"};
    bool ok = false;
    for (const auto& k : known) ok = ok || (k == prefix);
    if (!ok) throw std::invalid_argument("unknown six-state prefix: " + prefix);

    const Mat m = letter_matrix(prefix, 0.0);
    const std::array<MeasurementBasis, 3> mub = {MeasurementBasis::z(), MeasurementBasis::x(), MeasurementBasis::y()};
    std::array<int, 3> perm{};
    for (int src = 0; src < 3; ++src) {
        bool found = false;
        for (int dst = 0; dst < 3 && !found; ++dst) {
            if (aligned_parity(m, mub[static_cast<size_t>(src)], mub[static_cast<size_t>(dst)])) {
                perm[static_cast<size_t>(src)] = dst;
                found = true;
            }
        }
        if (!found) throw std::logic_error("prefix does not permute the mutually unbiased bases");
    }
    return perm;
}

int coding_bit(const OperatorCatalog& catalog, CodingMode mode, const std::string& label, int source_basis,
               int target_basis) {
    const int op = catalog.index_of(label);
    if (op < 0) throw std::invalid_argument("operator not in catalog: " + label);
    if (catalog.image(op, source_basis) != std::optional<int>(target_basis)) {
        throw std::invalid_argument("coding_bit: operator " + label + " is not kept in this cell");
    }
    switch (mode) {
        case CodingMode::FixedPerOperator: {
            if (catalog.kind() != CatalogKind::Bb84Four) {
                throw std::invalid_argument("fixed-per-operator coding is only defined for bb84-4");
            }
            // 0 for Z and H, 1 for X and HXZ.
            return (label == "Z" || label == "H") ? 0 : 1;
        }
        case CodingMode::FlipParityPerCell:
            return catalog.parity(op, source_basis);
    }
    throw std::logic_error("unreachable");
}

std::vector<int> consistent_operators(const OperatorCatalog& catalog, int source_basis, int state_index,
                                      int meas_basis, int outcome) {
    std::vector<int> out;
    for (int k = 0; k < catalog.size(); ++k) {
        if (catalog.image(k, source_basis) != std::optional<int>(meas_basis)) continue;
        // Image operators act deterministically on basis states: the outcome
        // index is the state index xor the flip parity.
        if ((state_index ^ catalog.parity(k, source_basis)) == outcome) out.push_back(k);
    }
    return out;
}

}  // namespace qkd
