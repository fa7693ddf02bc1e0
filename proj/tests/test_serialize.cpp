#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "gr/imageio.hpp"
#include "gr/serialize.hpp"
#include "support.hpp"

using namespace gr;

TEST_CASE("PGM round trip") {
    testsupport::TempDir tmp("pgm");
    Rng rng(1);
    GrayImage img = testsupport::random_gray(rng, 40);
    io::write_gray(tmp.path() / "x.pgm", img);
    auto back = io::read_gray(tmp.path() / "x.pgm");
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.data == img.data);
}

TEST_CASE("PNG gray and RGB round trips") {
    testsupport::TempDir tmp("png");
    Rng rng(2);
    for (int it = 0; it < 5; ++it) {
        GrayImage img = testsupport::random_gray(rng, 50);
        io::write_gray(tmp.path() / "g.png", img);
        auto back = io::read_gray(tmp.path() / "g.png");
        CHECK(back.data == img.data);
    }

    RgbImage rgb(23, 17);
    for (auto& v : rgb.data) v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    io::write_rgb(tmp.path() / "c.png", rgb);
    auto rgb_back = io::read_rgb(tmp.path() / "c.png");
    CHECK(rgb_back.data == rgb.data);

    // gray read of an RGB file applies the luma weights
    auto gray = io::read_gray(tmp.path() / "c.png");
    CHECK(gray.width == 23);

    CHECK_THROWS_AS(io::read_gray(tmp.path() / "missing.png"), InputError);
}

TEST_CASE("PNG encoding is byte-stable across writes") {
    testsupport::TempDir tmp("pngdet");
    Rng rng(3);
    GrayImage img = testsupport::random_gray(rng, 30);
    io::write_gray(tmp.path() / "a.png", img);
    io::write_gray(tmp.path() / "b.png", img);
    std::ifstream fa(tmp.path() / "a.png", std::ios::binary);
    std::ifstream fb(tmp.path() / "b.png", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("masks are stored as 0/255 and re-binarized on read") {
    testsupport::TempDir tmp("mask");
    BinaryMask m(9, 7);
    m.at(3, 2) = 1;
    m.at(8, 6) = 1;
    io::write_mask(tmp.path() / "m.png", m);

    auto raw = io::read_gray(tmp.path() / "m.png");
    for (auto v : raw.data) CHECK((v == 0 || v == 255));

    auto back = io::read_mask(tmp.path() / "m.png");
    CHECK(back.data == m.data);
}

TEST_CASE("weights file round trip and spec-hash guard") {
    testsupport::TempDir tmp("weights");
    std::map<std::string, std::vector<float>> weights;
    weights["a/kernel"] = {1.0f, -2.0f, 0.5f};
    weights["b/bias"] = {0.25f};

    serialize::write_weights(tmp.path() / "w.bin", weights, 0xDEADBEEFull);
    auto back = serialize::read_weights(tmp.path() / "w.bin", 0xDEADBEEFull);
    CHECK(back == weights);

    CHECK_THROWS_AS(serialize::read_weights(tmp.path() / "w.bin", 0x1234ull), InputError);
    CHECK_THROWS_AS(serialize::read_weights(tmp.path() / "nope.bin", 0xDEADBEEFull),
                    MissingArtifactError);
}

TEST_CASE("history CSV layout") {
    testsupport::TempDir tmp("hist");
    std::vector<trainer::EpochStats> history = {{1, 0.5, 60.0, 0.6, 55.0},
                                                {2, 0.25, 80.0, 0.3, 75.0}};
    serialize::write_history_csv(tmp.path() / "h.csv", history);
    std::ifstream in(tmp.path() / "h.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_loss,train_acc,val_loss,val_acc");
    std::getline(in, line);
    CHECK(line == "1,0.500000,60.0000,0.600000,55.0000");
}

TEST_CASE("ttest and latency JSON field names") {
    eval::TTestReport r;
    r.n = 10;
    r.mean = 99.821;
    r.sd = 0.3088;
    r.sem = 0.0976;
    r.mu = 99.0;
    r.t = 8.405;
    r.df = 9;
    r.p_one_sided = 0.00001;
    r.p_two_sided = 0.00002;
    auto j = serialize::ttest_to_json(r);
    for (const char* key : {"n", "mean", "sd", "sem", "t", "df", "p_one_sided", "p_two_sided"})
        CHECK(j.contains(key));

    realtime::LatencyReport rep;
    rep.per_class_avg_ms["ok"] = 0.099;
    rep.overall_avg_ms = 0.117;
    rep.fps = 20.0;
    rep.frames = 100;
    auto lj = serialize::latency_to_json(rep);
    CHECK(lj.at("per_class_avg_ms").at("ok") == doctest::Approx(0.099));
    CHECK(lj.at("overall_avg_ms") == doctest::Approx(0.117));
    CHECK(lj.at("fps") == doctest::Approx(20.0));
}

TEST_CASE("session CSV layout") {
    testsupport::TempDir tmp("session");
    realtime::FrameResult f;
    f.frame_index = 3;
    f.timestamp_ms = 123.456;
    f.label = "palm";
    f.confidence = 0.875f;
    f.latency_ms = 7.25;
    serialize::write_session_csv(tmp.path() / "s.csv", {f});
    std::ifstream in(tmp.path() / "s.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "frame_index,timestamp_ms,label,confidence,latency_ms");
    std::getline(in, line);
    CHECK(line == "3,123.456,palm,0.8750,7.250");
}
