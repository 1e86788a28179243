#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "qkd/opsets.hpp"

using namespace qkd;

namespace {

// Outcome distribution signature of an operator on every legal source state,
// used for the coding well-definedness check.
std::vector<double> statistics_signature(const OperatorCatalog& cat, int op, int src, int dst) {
    std::vector<double> sig;
    const MeasurementBasis& target = cat.bases()[static_cast<size_t>(dst)];
    for (int i = 0; i < 2; ++i) {
        const PureState out = apply(cat.entry(op).op, cat.bases()[static_cast<size_t>(src)].vector(i));
        const auto [p0, p1] = born_probabilities(out, 0, target);
        sig.push_back(std::round(p0 * 1e9) / 1e9);
        sig.push_back(std::round(p1 * 1e9) / 1e9);
    }
    return sig;
}

}  // namespace

TEST_CASE("catalog contents and sizes") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    CHECK(bb4.size() == 4);
    CHECK(bb4.index_of("Z") >= 0);
    CHECK(bb4.index_of("X") >= 0);
    CHECK(bb4.index_of("H") >= 0);
    CHECK(bb4.index_of("HXZ") >= 0);

    const OperatorCatalog bb8 = OperatorCatalog::build(CatalogKind::Bb84Eight);
    CHECK(bb8.size() == 8);
    for (const char* l : {"I", "X", "Z", "XZ", "H", "HX", "HZ", "HXZ"}) CHECK(bb8.index_of(l) >= 0);

    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    CHECK(six.size() == 24);
    std::set<std::string> labels;
    for (const auto& e : six.entries()) labels.insert(e.label);
    CHECK(labels.size() == 24);

    const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6);
    CHECK(gen.size() == 12);

    CHECK_THROWS_AS(OperatorCatalog::build(CatalogKind::General12), std::invalid_argument);
    CHECK_THROWS_AS(OperatorCatalog::build(CatalogKind::Bb84Four, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(OperatorCatalog::build(CatalogKind::General12, 2.0), std::invalid_argument);
}

TEST_CASE("six-state prefix matrices act as defined") {
    // H2|+> = |a> etc.; the four auxiliary prefixes are fixed matrices.
    const Unitary h1 = operator_from_word("H1");
    const Unitary h2 = operator_from_word("H2");
    const Unitary h3 = operator_from_word("H3");
    const Unitary h4 = operator_from_word("H4");
    const double is2 = 1 / std::sqrt(2.0);
    const auto close = [](cx a, cx b) { return std::abs(a - b) < 1e-12; };
    CHECK(close(h1.matrix()(0, 0), cx(is2, 0)));
    CHECK(close(h1.matrix()(0, 1), cx(0, -is2)));
    CHECK(close(h1.matrix()(1, 0), cx(0, is2)));
    CHECK(close(h1.matrix()(1, 1), cx(-is2, 0)));
    CHECK(close(h2.matrix()(1, 1), cx(0, 1)));
    CHECK(close(h3.matrix()(1, 0), cx(0, is2)));
    CHECK(close(h4.matrix()(1, 1), cx(0, is2)));
    CHECK(approx_equal_up_to_phase(apply(h2, PureState::ket("+")), PureState::ket("a"), 1e-12));
}

TEST_CASE("general-12 U is the stated involution and matches H at pi/4") {
    for (double theta : {0.3, std::numbers::pi / 8, std::numbers::pi / 6, 1.2}) {
        const Unitary u = operator_from_word("U", theta);
        const Mat u2 = u.matrix() * u.matrix();
        CHECK((u2 - Mat::identity(2)).frobenius_norm() < 1e-12);
    }
    const Unitary u = operator_from_word("U", std::numbers::pi / 4);
    const Mat diff = u.matrix() - operator_from_word("H").matrix();
    CHECK(diff.frobenius_norm() < 1e-12);
}

TEST_CASE("unitarity across every catalog") {
    for (auto kind : {CatalogKind::Bb84Four, CatalogKind::Bb84Eight, CatalogKind::SixState24}) {
        const OperatorCatalog cat = OperatorCatalog::build(kind);
        for (const auto& e : cat.entries()) {
            const Mat shouldnt = e.op.matrix() * e.op.matrix().adjoint() - Mat::identity(2);
            CHECK(shouldnt.frobenius_norm() < 1e-12);
        }
    }
}

TEST_CASE("basis images") {
    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    // H2 maps the X basis onto the Y basis (H2|+> = |a>, direct arithmetic).
    const auto img = basis_image(six, "H2", MeasurementBasis::x());
    REQUIRE(img.has_value());
    CHECK(img->label() == BasisLabel::Y);
    // I on Z stays Z.
    const auto id = basis_image(six, "I", MeasurementBasis::z());
    REQUIRE(id.has_value());
    CHECK(id->label() == BasisLabel::Z);
    // X on the general B1 basis has no image for generic theta.
    const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6);
    CHECK_FALSE(basis_image(gen, "X", gen.bases()[1]).has_value());
}

TEST_CASE("prefix permutations cover all six rearrangements") {
    CHECK(prefix_permutation("I") == std::array<int, 3>{0, 1, 2});
    CHECK(prefix_permutation("H") == std::array<int, 3>{1, 0, 2});   // swaps Z and X, fixes Y
    CHECK(prefix_permutation("H2") == std::array<int, 3>{0, 2, 1});  // fixes Z, swaps X and Y
    std::set<std::array<int, 3>> perms;
    for (const char* p : {"I", "H", "H1", "H2", "H3", "H4"}) perms.insert(prefix_permutation(p));
    CHECK(perms.size() == 6);
    CHECK_THROWS_AS(prefix_permutation("H5"), std::invalid_argument);
}

TEST_CASE("flip parity") {
    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    const MeasurementBasis z = MeasurementBasis::z(), x = MeasurementBasis::x();
    // The (Z,Z) coding anchor: 0 for I, Z, H2, H2Z; 1 for X, XZ, H2X, H2XZ.
    for (const char* l : {"I", "Z", "H2", "H2Z"}) CHECK(flip_parity(six, l, z, z) == 0);
    for (const char* l : {"X", "XZ", "H2X", "H2XZ"}) CHECK(flip_parity(six, l, z, z) == 1);
    // Z|+> = |->: index flip in the X basis.
    CHECK(flip_parity(six, "Z", x, x) == 1);
    // invalid cell
    CHECK_THROWS_AS(flip_parity(six, "H", z, z), std::invalid_argument);
}

TEST_CASE("coding bits") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    // Fixed map: H -> 0 and HXZ -> 1, in any kept cell.
    CHECK(coding_bit(bb4, CodingMode::FixedPerOperator, "H", 0, 1) == 0);
    CHECK(coding_bit(bb4, CodingMode::FixedPerOperator, "HXZ", 1, 0) == 1);
    // Flip parity: XZ|+> is proportional to |->.
    const OperatorCatalog bb8 = OperatorCatalog::build(CatalogKind::Bb84Eight);
    CHECK(coding_bit(bb8, CodingMode::FlipParityPerCell, "XZ", 1, 1) == 1);
    // Cell not kept.
    CHECK_THROWS_AS(coding_bit(bb4, CodingMode::FixedPerOperator, "H", 0, 0), std::invalid_argument);
    // Fixed coding is bb84-4 only.
    CHECK_THROWS_AS(coding_bit(bb8, CodingMode::FixedPerOperator, "X", 0, 0), std::invalid_argument);
}

TEST_CASE("six-state partition: 8 of 24 operators per cell") {
    const OperatorCatalog six = OperatorCatalog::build(CatalogKind::SixState24);
    for (int src = 0; src < 3; ++src) {
        for (int dst = 0; dst < 3; ++dst) {
            int count = 0;
            for (int op = 0; op < six.size(); ++op) {
                if (six.image(op, src) == std::optional<int>(dst)) ++count;
            }
            CHECK(count == 8);
        }
    }
    // The (Z,Z) cell is exactly the eight operators named in the coding anchor.
    std::set<std::string> kept;
    for (int op = 0; op < six.size(); ++op) {
        if (six.image(op, 0) == std::optional<int>(0)) kept.insert(six.entry(op).label);
    }
    CHECK(kept == std::set<std::string>{"I", "X", "Z", "XZ", "H2", "H2X", "H2Z", "H2XZ"});
}

TEST_CASE("general-12 validity table for random angles") {
    RandomStream rng(77, 0, 0);
    const std::map<std::string, std::set<std::string>> expected = {
        {"I", {"00", "11"}},   {"XZ", {"00", "11"}},  {"U", {"01", "10"}},   {"UXZ", {"01", "10"}},
        {"X", {"00"}},         {"Z", {"00"}},         {"UX", {"01"}},        {"UZ", {"01"}},
        {"XU", {"10"}},        {"ZU", {"10"}},        {"UXU", {"11"}},       {"UZU", {"11"}},
    };
    for (int trial = 0; trial < 10; ++trial) {
        double theta;
        do {
            theta = 0.01 + rng.uniform() * (std::numbers::pi / 2 - 0.02);
        } while (std::abs(theta - std::numbers::pi / 4) < 0.01);
        const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, theta);
        for (const auto& [label, cells] : expected) {
            const int op = gen.index_of(label);
            std::set<std::string> got;
            for (int src = 0; src < 2; ++src) {
                const auto img = gen.image(op, src);
                if (img) got.insert(std::to_string(src) + std::to_string(*img));
            }
            CHECK_MESSAGE(got == cells, "operator ", label, " at theta=", theta);
        }
    }
}

TEST_CASE("general-12 images stay correct near the degenerate angles") {
    // 1e-3 away from 0 and from pi/4 the alignment check still separates true
    // basis images (residual 0) from near misses (residual >= ~4e-6).
    for (const double theta : {1e-3, std::numbers::pi / 4 - 1e-3, std::numbers::pi / 4 + 1e-3,
                               std::numbers::pi / 2 - 1e-3}) {
        const OperatorCatalog gen = OperatorCatalog::build(CatalogKind::General12, theta);
        CHECK(gen.image(gen.index_of("U"), 0) == std::optional<int>(1));
        CHECK(gen.image(gen.index_of("X"), 0) == std::optional<int>(0));
        CHECK_FALSE(gen.image(gen.index_of("X"), 1).has_value());
        CHECK_FALSE(gen.image(gen.index_of("UX"), 1).has_value());
        CHECK(gen.image(gen.index_of("UZU"), 1) == std::optional<int>(1));
    }
}

TEST_CASE("bb84-4 matrices are linearly dependent with rank 2") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    std::vector<CVec> vectorized;
    for (const auto& e : bb4.entries()) {
        CVec v;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) v.push_back(e.op.matrix()(i, j));
        // normalize as vectors in C^4
        const double n = vec_norm(v);
        for (cx& a : v) a /= n;
        vectorized.push_back(std::move(v));
    }
    CHECK(span_rank(vectorized, 1e-9) == 2);
}

TEST_CASE("coding well-definedness: equal statistics imply equal bits") {
    std::vector<OperatorCatalog> catalogs;
    catalogs.push_back(OperatorCatalog::build(CatalogKind::Bb84Four));
    catalogs.push_back(OperatorCatalog::build(CatalogKind::Bb84Eight));
    catalogs.push_back(OperatorCatalog::build(CatalogKind::SixState24));
    catalogs.push_back(OperatorCatalog::build(CatalogKind::General12, std::numbers::pi / 6));
    for (const OperatorCatalog& cat : catalogs) {
        const CodingMode coding = default_coding(cat.kind());
        const int nb = static_cast<int>(cat.bases().size());
        for (int src = 0; src < nb; ++src) {
            for (int dst = 0; dst < nb; ++dst) {
                std::map<std::vector<double>, std::set<int>> by_signature;
                for (int op = 0; op < cat.size(); ++op) {
                    if (cat.image(op, src) != std::optional<int>(dst)) continue;
                    by_signature[statistics_signature(cat, op, src, dst)].insert(
                        coding_bit(cat, coding, cat.entry(op).label, src, dst));
                }
                for (const auto& [sig, bits] : by_signature) CHECK(bits.size() == 1);
            }
        }
    }
}

TEST_CASE("consistent operators identify what bob encoded") {
    const OperatorCatalog bb4 = OperatorCatalog::build(CatalogKind::Bb84Four);
    // sent |0>, cell (Z,Z), outcome 1 -> X
    auto ops = consistent_operators(bb4, 0, 0, 0, 1);
    REQUIRE(ops.size() == 1);
    CHECK(bb4.entry(ops[0]).label == "X");
    // sent |->, cell (X,X), outcome 0 -> Z
    ops = consistent_operators(bb4, 1, 1, 1, 0);
    REQUIRE(ops.size() == 1);
    CHECK(bb4.entry(ops[0]).label == "Z");
    // sent |1>, cell (Z,X), outcome 0 -> HXZ
    ops = consistent_operators(bb4, 0, 1, 1, 0);
    REQUIRE(ops.size() == 1);
    CHECK(bb4.entry(ops[0]).label == "HXZ");
}
