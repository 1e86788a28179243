#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qkd/qmath.hpp"

namespace qkd {

enum class CatalogKind { Bb84Four, Bb84Eight, SixState24, General12 };

std::string to_string(CatalogKind kind);
std::optional<CatalogKind> catalog_kind_from_string(const std::string& name);

// A catalog entry: an operator word over {I, X, Z, H, H1..H4, U} and its
// matrix. Words multiply left to right as operators, i.e. "HXZ" acts as
// H * X * Z on states (Z first).
struct CatalogEntry {
    std::string label;
    Unitary op;
};

enum class CodingMode { FixedPerOperator, FlipParityPerCell };

std::string to_string(CodingMode mode);
std::optional<CodingMode> coding_mode_from_string(const std::string& name);
CodingMode default_coding(CatalogKind kind);

/// Bob's encoding-operator catalog for one protocol variant, together with the
/// protocol's measurement bases and precomputed basis-image / flip-parity
/// tables. Immutable once built.
class OperatorCatalog {
public:
    OperatorCatalog() = default;  // empty; assign from build()
    static OperatorCatalog build(CatalogKind kind, std::optional<double> theta = std::nullopt);

    CatalogKind kind() const { return kind_; }
    double theta() const { return theta_; }
    int size() const { return static_cast<int>(entries_.size()); }
    const std::vector<CatalogEntry>& entries() const { return entries_; }
    const CatalogEntry& entry(int i) const { return entries_.at(static_cast<size_t>(i)); }
    const CatalogEntry& entry(const std::string& label) const;
    int index_of(const std::string& label) const;  // -1 when absent

    // Protocol measurement bases: {Z, X} for BB84 kinds, {Z, X, Y} for
    // six-state, {Z, General(theta)} for the general scheme.
    const std::vector<MeasurementBasis>& bases() const { return bases_; }
    int basis_index(const MeasurementBasis& b) const;  // -1 when not a protocol basis

    // Target basis the operator sends a source basis to, or nullopt when the
    // image is not a protocol basis (phase alignment checked at 1e-9).
    std::optional<int> image(int op_index, int source_basis) const;

    // 0 when the operator maps source vector 0 to target vector 0 up to phase,
    // 1 when it crosses. Throws when the (source -> image) cell is invalid.
    int parity(int op_index, int source_basis) const;

    // Distinct target bases this operator can produce; drives Bob's
    // basis-choice rule in the general scheme.
    const std::vector<int>& valid_targets(int op_index) const;

private:
    CatalogKind kind_ = CatalogKind::Bb84Four;
    double theta_ = 0.0;
    std::vector<CatalogEntry> entries_;
    std::vector<MeasurementBasis> bases_;
    struct ImageCell {
        std::optional<int> target;
        int parity = 0;
    };
    std::vector<std::vector<ImageCell>> images_;  // [op][source basis]
    std::vector<std::vector<int>> targets_;       // [op] -> distinct image bases
};

// Builds the matrix for an operator word; theta is consumed by 'U' letters.
Unitary operator_from_word(const std::string& word, double theta = 0.0);

// Free-function forms mirroring the catalog tables.
std::optional<MeasurementBasis> basis_image(const OperatorCatalog& catalog, const std::string& label,
                                            const MeasurementBasis& source);
int flip_parity(const OperatorCatalog& catalog, const std::string& label, const MeasurementBasis& source,
                const MeasurementBasis& target);

// Permutation of the mutually unbiased bases {Z, X, Y} induced by a six-state
// prefix ("I", "H", "H1".."H4"); result[i] is the image of basis i in the
// order Z=0, X=1, Y=2.
std::array<int, 3> prefix_permutation(const std::string& prefix);

// Key bit carried by an operator in a kept (source, target) cell.
int coding_bit(const OperatorCatalog& catalog, CodingMode mode, const std::string& label, int source_basis,
               int target_basis);

// Indices of catalog operators whose image matches the measured basis and that
// deterministically produce the observed outcome on the given Alice state.
// This is how Alice (who knows her state) identifies what Bob encoded.
std::vector<int> consistent_operators(const OperatorCatalog& catalog, int source_basis, int state_index,
                                      int meas_basis, int outcome);

}  // namespace qkd
