#include <doctest.h>

#include <functional>

#include <Eigen/Dense>

#include "mvts/dataset.hpp"
#include "mvts/image.hpp"
#include "mvts/synth.hpp"
#include "mvts/text_io.hpp"
#include "support.hpp"

using namespace mvts;
using mvts::test::TempDir;

namespace {

AttributeSchema small_schema()
{
    return AttributeSchema({{"建筑面积", AttributeKind::numeric, {}},
                            {"户型结构", AttributeKind::categorical, {"平层", "复式", "错层"}},
                            {"是否有电梯", AttributeKind::categorical, {"无", "有"}},
                            {"CPI", AttributeKind::macro_numeric, {}}});
}

const char* kHeader = "id,price,建筑面积,户型结构,是否有电梯,CPI,img_1,img_2,img_3,img_4\n";

std::string row(const std::string& id, const std::string& layout, const std::string& area = "88.5")
{
    return id + ",1250000," + area + "," + layout + ",有,101.2,a.ppm,b.ppm,c.ppm,d.ppm\n";
}

std::size_t row_of_error(const std::function<void()>& f)
{
    try {
        f();
    } catch (const RowError& e) {
        return e.row();
    }
    return 0;
}

}  // namespace

TEST_CASE("load_records ingests valid rows and declared levels")
{
    TempDir dir;
    write_text(dir / "r.csv", std::string(kHeader) + row("h1", "平层") + row("h2", "复式"));
    const auto records = load_records(dir / "r.csv", small_schema());
    REQUIRE(records.size() == 2);
    CHECK(records[0].id == "h1");
    CHECK(records[1].level("户型结构") == "复式");
    CHECK(records[0].number("建筑面积") == 88.5);
    CHECK(records[0].price == 1250000.0);
    CHECK(records[0].image_refs == std::vector<std::string>{"a.ppm", "b.ppm", "c.ppm", "d.ppm"});
}

TEST_CASE("load_records rejects an undeclared level with the row index and the level")
{
    TempDir dir;
    write_text(dir / "r.csv", std::string(kHeader) + row("h1", "平层") + row("h2", "阁楼"));
    try {
        load_records(dir / "r.csv", small_schema());
        FAIL("expected a row error");
    } catch (const RowError& e) {
        CHECK(e.row() == 2);
        CHECK(std::string(e.what()).find("阁楼") != std::string::npos);
    }
}

TEST_CASE("load_records reports unparsable numbers and missing columns")
{
    TempDir dir;
    write_text(dir / "r.csv", std::string(kHeader) + row("h1", "平层") + row("h2", "平层", "eighty"));
    CHECK(row_of_error([&] { load_records(dir / "r.csv", small_schema()); }) == 2);

    write_text(dir / "m.csv", "id,price,建筑面积,户型结构,CPI,img_1,img_2,img_3,img_4\n");
    CHECK_THROWS_AS(load_records(dir / "m.csv", small_schema()), SchemaError);
}

TEST_CASE("schema rejects duplicate names and empty or repeated levels")
{
    CHECK_THROWS_AS(AttributeSchema({{"a", AttributeKind::numeric, {}}, {"a", AttributeKind::numeric, {}}}),
                    SchemaError);
    CHECK_THROWS_AS(AttributeSchema({{"c", AttributeKind::categorical, {}}}), SchemaError);
    CHECK_THROWS_AS(AttributeSchema({{"c", AttributeKind::categorical, {"x", "x"}}}), SchemaError);
    const AttributeSchema s = small_schema();
    CHECK(AttributeSchema::from_json(s.to_json()) == s);
    CHECK(s.hash().size() == 16);
}

TEST_CASE("one-hot encoding follows schema then level order")
{
    const AttributeSchema schema = small_schema();
    HouseRecord r;
    r.id = "x";
    r.price = 1.0;
    r.image_refs = {"1", "2", "3", "4"};
    r.values = {{"建筑面积", 70.0}, {"户型结构", std::string("平层")}, {"是否有电梯", std::string("有")}, {"CPI", 99.5}};
    const auto v = one_hot_encode(r, schema);
    CHECK(v == std::vector<double>{70.0, 1, 0, 0, 0, 1, 99.5});
    CHECK(schema.encoded_width() == 7);
    CHECK(schema.encoded_columns().size() == 7);
}

TEST_CASE("decode(encode(r)) is the identity on 50 random records")
{
    const SynthDataset data = synth_generate({.n = 50, .seed = 11});
    const Tensor X = one_hot_encode(data.records, data.schema);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto decoded = one_hot_decode(X.row(i), data.schema);
        CHECK(decoded == data.records[i].values);
    }
}

TEST_CASE("every categorical block of an encoded row is a single 1")
{
    const SynthDataset data = synth_generate({.n = 80, .seed = 4});
    const Tensor X = one_hot_encode(data.records, data.schema);
    for (std::size_t i = 0; i < X.dim(0); ++i) {
        std::size_t c = 0;
        for (const auto& a : data.schema.attributes()) {
            if (!a.is_numeric()) {
                double sum = 0.0;
                for (std::size_t k = 0; k < a.levels.size(); ++k) {
                    const double v = X.at(i, c + k);
                    CHECK((v == 0.0 || v == 1.0));
                    sum += v;
                }
                CHECK(sum == 1.0);
                c += a.levels.size();
            } else {
                ++c;
            }
        }
    }
}

TEST_CASE("min-max scaler arithmetic, inverse and degenerate columns")
{
    Tensor X({3, 2}, std::vector<double>{100, 5, 200, 5, 300, 5});
    const std::vector<std::size_t> first{0};
    const auto scaler = MinMaxScaler::fit(X, first);
    Tensor Y = X;
    scaler.apply(Y);
    CHECK(Y.at(0, 0) == 0.0);
    CHECK(Y.at(1, 0) == 0.5);
    CHECK(Y.at(2, 0) == 1.0);
    CHECK(Y.at(1, 1) == 5.0);  // unlisted column passes through

    const std::vector<std::size_t> both{0, 1};
    const std::vector<std::string> names{"area", "lift"};
    try {
        MinMaxScaler::fit(X, both, {}, names);
        FAIL("constant column accepted");
    } catch (const ScalerError& e) {
        CHECK(std::string(e.what()).find("lift") != std::string::npos);
    }

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    Tensor R({200, 4});
    for (double& v : R.values()) v = u(rng);
    const std::vector<std::size_t> cols{0, 1, 2, 3};
    const auto s = MinMaxScaler::fit(R, cols);
    Tensor Z = R;
    s.apply(Z);
    for (double v : Z.values()) CHECK((v >= 0.0 && v <= 1.0));
    s.inverse(Z);
    for (std::size_t i = 0; i < R.size(); ++i) CHECK(mvts::test::rel_diff(Z[i], R[i]) <= 1e-12);
    CHECK(MinMaxScaler::from_json(s.to_json()).to_json() == s.to_json());
}

TEST_CASE("price scaler round trip")
{
    const std::vector<double> p{3e5, 7.5e5, 1.2e6, 9e5};
    const auto s = PriceScaler::fit(p);
    const auto back = s.inverse(s.apply(p));
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(mvts::test::rel_diff(back[i], p[i]) <= 1e-12);
    CHECK(s.apply(3e5) == 0.0);
    CHECK(s.apply(1.2e6) == 1.0);
    CHECK(PriceScaler().identity());
    CHECK_THROWS_AS(PriceScaler::fit(std::vector<double>{2.0, 2.0}), ScalerError);
}

TEST_CASE("split sizes, rounding and determinism")
{
    const Split a = split(100, 0.75, 7);
    CHECK(a.train.size() == 75);
    CHECK(a.test.size() == 25);
    const Split b = split(100, 0.75, 7);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    const Split c = split(4, 0.75, 0);
    CHECK(c.train.size() == 3);
    CHECK(c.test.size() == 1);
    CHECK_THROWS_AS(split(3, 0.75, 0), DataError);
    CHECK_THROWS_AS(split(10, 1.0, 0), DataError);
}

TEST_CASE("split is a disjoint exhaustive partition for many (n, seed)")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 500;
        const Split s = split(n, 0.75, rng());
        CHECK(s.train.size() == static_cast<std::size_t>(std::llround(0.75 * static_cast<double>(n))));
        std::vector<int> seen(n, 0);
        for (std::size_t r : s.train) ++seen.at(r);
        for (std::size_t r : s.test) ++seen.at(r);
        CHECK(std::all_of(seen.begin(), seen.end(), [](int k) { return k == 1; }));
    }
}

TEST_CASE("images: constant views stay constant, distinct views land in their quadrants")
{
    TempDir dir;
    HouseRecord r;
    r.id = "h";
    r.price = 1.0;
    for (int v = 1; v <= 4; ++v) {
        const std::string name = "g" + std::to_string(v) + ".ppm";
        write_ppm(dir / name, Image(17, 9, 128, 128, 128));
        r.image_refs.push_back(name);
    }
    const Tensor gray = load_images(r, dir.path(), 128);
    CHECK(gray.shape() == Shape{3, 128, 128});
    for (double v : gray.values()) CHECK(v == doctest::Approx(128.0 / 255.0).epsilon(1e-12));

    const std::uint8_t colours[4][3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {255, 255, 0}};
    r.image_refs.clear();
    for (int v = 0; v < 4; ++v) {
        const std::string name = "c" + std::to_string(v) + ".ppm";
        write_ppm(dir / name, Image(64, 64, colours[v][0], colours[v][1], colours[v][2]));
        r.image_refs.push_back(name);
    }
    const Tensor grid = load_images(r, dir.path(), 128);
    for (int v = 0; v < 4; ++v) {
        const std::size_t y0 = (v / 2) * 64, x0 = (v % 2) * 64;
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x) mean += grid[(c * 128 + y0 + y) * 128 + x0 + x];
            CHECK(mean / 4096.0 == doctest::Approx(colours[v][c] / 255.0).epsilon(1e-12));
        }
    }

    std::filesystem::remove(dir / "c2.ppm");
    try {
        load_images(r, dir.path(), 128);
        FAIL("missing view accepted");
    } catch (const ImageError& e) {
        CHECK(std::string(e.what()).find("img_3") != std::string::npos);
    }
}

TEST_CASE("PPM round trip and corrupt files")
{
    TempDir dir;
    Image img(3, 2);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 13);
    write_ppm(dir / "x.ppm", img);
    CHECK(read_ppm(dir / "x.ppm") == img);
    write_text(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), ImageError);
    write_text(dir / "short.ppm", "P6\n4 4\n255\nabc");
    CHECK_THROWS_AS(read_ppm(dir / "short.ppm"), ImageError);
}

TEST_CASE("deep features: per-record mean of four views")
{
    TempDir dir;
    std::vector<HouseRecord> records(2);
    records[0].id = "a";
    records[1].id = "b";
    const std::size_t dim = 1000;
    Tensor views({2, 4, dim});
    for (std::size_t v = 0; v < 4; ++v) {
        for (std::size_t k = 0; k < dim; ++k) views[(0 * 4 + v) * dim + k] = 0.001 * static_cast<double>(k);
        views[(1 * 4 + v) * dim + v] = 1.0;  // unit basis e_v
    }
    write_deep_features(dir / "d.csv", records, views);
    const Tensor X = load_deep_features(dir / "d.csv", records);
    CHECK(X.shape() == Shape{2, dim});
    for (std::size_t k = 0; k < dim; ++k)
        CHECK(X.at(0, k) == doctest::Approx(0.001 * static_cast<double>(k)).epsilon(1e-15));
    for (std::size_t k = 0; k < dim; ++k) CHECK(X.at(1, k) == (k < 4 ? 0.25 : 0.0));
}

TEST_CASE("deep features: wrong width and missing views are rejected")
{
    TempDir dir;
    std::vector<HouseRecord> records(1);
    records[0].id = "a";
    std::string header = "id,view";
    for (int k = 0; k < 1000; ++k) header += ",f" + std::to_string(k);
    std::string ok_row = "a,1";
    for (int k = 0; k < 1000; ++k) ok_row += ",0.5";
    std::string short_row = "a,2";
    for (int k = 0; k < 999; ++k) short_row += ",0.5";
    write_text(dir / "short.csv", header + "\n" + ok_row + "\n" + short_row + "\n");
    try {
        load_deep_features(dir / "short.csv", records);
        FAIL("999-wide row accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("length") != std::string::npos);
    }
    write_text(dir / "three.csv", header + "\n" + ok_row + "\n" + "a,2" + ok_row.substr(3) + "\n" + "a,3" +
                                      ok_row.substr(3) + "\n");
    CHECK_THROWS_AS(load_deep_features(dir / "three.csv", records), DataError);
}

TEST_CASE("synthetic generator: determinism and n precondition")
{
    TempDir dir;
    write_synth(synth_generate({.n = 40, .seed = 1, .view_side = 8, .deep_dim = 1000}), dir / "a");
    write_synth(synth_generate({.n = 40, .seed = 1, .view_side = 8, .deep_dim = 1000}), dir / "b");
    for (const auto* f : {"records.csv", "schema.json", "deep_features.csv", "ground_truth.json",
                          "images/h0007_3.ppm"})
        CHECK(read_text(dir / "a" / f) == read_text(dir / "b" / f));
    CHECK_THROWS_AS(synth_generate({.n = 10}), DataError);
}

TEST_CASE("synthetic generator: schema shape and in-memory path agrees with files")
{
    TempDir dir;
    const SynthDataset data = synth_generate({.n = 30, .seed = 2, .view_side = 16});
    std::size_t numeric = 0, categorical = 0;
    for (const auto& a : data.schema.attributes()) (a.is_numeric() ? numeric : categorical) += 1;
    CHECK(numeric >= 3);
    CHECK(categorical >= 2);
    write_synth(data, dir.path());
    const RawDataset disk = load_dataset(dir.path(), true, true, 32);
    const RawDataset mem = to_raw_dataset(data, 32, true, true);
    CHECK(disk.records == mem.records);
    CHECK(disk.deep == mem.deep);
    CHECK(disk.images == mem.images);
}

TEST_CASE("synthetic generator: without noise or image signal an affine text model is exact")
{
    const SynthDataset data = synth_generate({.n = 200, .seed = 9, .noise = 0.0, .image_weight = 0.0});
    const Tensor X = one_hot_encode(data.records, data.schema);
    const auto n = static_cast<Eigen::Index>(X.dim(0)), d = static_cast<Eigen::Index>(X.dim(1));
    Eigen::MatrixXd A(n, d + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) A(i, j) = X.at(i, j);
        A(i, d) = 1.0;
        y(i) = data.records[i].price;
    }
    const Eigen::VectorXd coef = A.completeOrthogonalDecomposition().solve(y);
    const Eigen::VectorXd fit = A * coef;
    double mape = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mape += std::abs(fit(i) - y(i)) / y(i);
    mape *= 100.0 / static_cast<double>(n);
    // Prices are whole currency units, so the residual is rounding only.
    CHECK(mape < 1e-4);
}

TEST_CASE("encode_dataset fits scalers on training rows only")
{
    const SynthDataset data = synth_generate({.n = 60, .seed = 3, .view_side = 8});
    const Split s = split(60, 0.75, 3);
    const EncodedDataset e = encode_dataset(to_raw_dataset(data, 16, true, true), s.train);
    CHECK(e.rows() == 60);
    CHECK(e.text.dim(0) == 60);
    CHECK(e.deep.shape() == Shape{60, 1000});
    CHECK(e.images.shape() == Shape{60, 3, 16, 16});
    for (std::size_t r : s.train) {
        for (double v : e.text.row(r)) CHECK((v >= 0.0 && v <= 1.0));
        CHECK((e.target[r] >= 0.0 && e.target[r] <= 1.0));
    }
    for (std::size_t i = 0; i < e.rows(); ++i)
        CHECK(e.price_scaler.inverse(e.target[i]) == doctest::Approx(e.price[i]).epsilon(1e-12));
    const EncodedDataset raw = encode_dataset(to_raw_dataset(data, 16, false, false), s.train, false);
    CHECK(raw.price_scaler.identity());
    CHECK(raw.target == raw.price);
}
