#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <unistd.h>

#include "mmtk/config.hpp"

using namespace mmtk;

namespace {

std::string write_temp(const std::string& body) {
    static int counter = 0;
    std::string path = ::testing::TempDir() + "cfg_" + std::to_string(getpid()) + "_" +
                       std::to_string(counter++) + ".cfg";
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST(Config, ToyDefaultsValidate) {
    RunConfig cfg;
    EXPECT_NO_THROW(validate_config(cfg));
    EXPECT_EQ(cfg.channels, 64);
    EXPECT_EQ(cfg.dmodel, 64);
    EXPECT_EQ(cfg.patch, 8);
    EXPECT_EQ(cfg.template_size, 32);
    EXPECT_EQ(cfg.search_size, 64);
    EXPECT_EQ(cfg.bins, 100);
    EXPECT_EQ(cfg.box_format, BoxFormat::corner);
    EXPECT_EQ(cfg.query_mode, QueryMode::multi_cues);
    EXPECT_DOUBLE_EQ(cfg.lr, 3e-4);
    EXPECT_DOUBLE_EQ(cfg.weight_decay, 1e-4);
}

TEST(Config, EveryKeyHasGetterAndSetter) {
    RunConfig cfg;
    for (const std::string& key : config_keys()) {
        const std::string v = config_get(cfg, key);
        EXPECT_NO_THROW(config_set(cfg, key, v)) << key;
        EXPECT_EQ(config_get(cfg, key), v) << key;
    }
}

TEST(Config, UnknownKeyRejected) {
    RunConfig cfg;
    EXPECT_THROW(config_set(cfg, "bogus_key", "1"), Error);
    EXPECT_THROW(config_get(cfg, "bogus_key"), Error);
    EXPECT_THROW(apply_config_line(cfg, "nope=3", "test"), Error);
}

TEST(Config, SerializeRoundTrip) {
    RunConfig cfg;
    cfg.bins = 777;
    cfg.lr = 0.00125;
    cfg.box_format = BoxFormat::center;
    cfg.query_mode = QueryMode::single_cue;
    cfg.difficulty = "hard";
    cfg.data_dir = "/tmp/somewhere";
    const std::string path = write_temp(serialize_config(cfg));
    RunConfig back;
    load_config_file(back, path);
    for (const std::string& key : config_keys())
        EXPECT_EQ(config_get(back, key), config_get(cfg, key)) << key;
    std::remove(path.c_str());
}

TEST(Config, FileParsingCommentsAndWhitespace) {
    const std::string path = write_temp(
        "# a comment\n"
        "\n"
        "  bins = 50  \n"
        "box_format=center # trailing comment\n");
    RunConfig cfg;
    load_config_file(cfg, path);
    EXPECT_EQ(cfg.bins, 50);
    EXPECT_EQ(cfg.box_format, BoxFormat::center);
    std::remove(path.c_str());
}

TEST(Config, BadLinesReportLineNumbers) {
    const std::string path = write_temp("bins=50\nnot_a_pair\n");
    RunConfig cfg;
    try {
        load_config_file(cfg, path);
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
    std::remove(path.c_str());
}

TEST(Config, MissingFileRejected) {
    RunConfig cfg;
    EXPECT_THROW(load_config_file(cfg, "/nonexistent/path.cfg"), Error);
}

TEST(Config, ValidationCatchesBadCombinations) {
    RunConfig bad;
    bad.dmodel = 60;  // not divisible by 8 heads
    EXPECT_THROW(validate_config(bad), Error);
    bad = RunConfig{};
    bad.template_size = 33;  // not divisible by patch
    EXPECT_THROW(validate_config(bad), Error);
    bad = RunConfig{};
    bad.bins = 1;
    EXPECT_THROW(validate_config(bad), Error);
    bad = RunConfig{};
    bad.lr = 0.0;
    EXPECT_THROW(validate_config(bad), Error);
    bad = RunConfig{};
    bad.difficulty = "nightmare";
    EXPECT_THROW(validate_config(bad), Error);
    bad = RunConfig{};
    bad.factor_x = 0.5;
    EXPECT_THROW(validate_config(bad), Error);
}

TEST(Config, ValueParsingErrors) {
    RunConfig cfg;
    EXPECT_THROW(config_set(cfg, "bins", "many"), Error);
    EXPECT_THROW(config_set(cfg, "lr", "fast"), Error);
    EXPECT_THROW(config_set(cfg, "box_format", "oval"), Error);
    EXPECT_THROW(config_set(cfg, "seed", "-1"), Error);
    config_set(cfg, "bins", "-3");  // parses; rejected at validation
    EXPECT_THROW(validate_config(cfg), Error);
}

TEST(Config, PrecedenceFileThenOverride) {
    const std::string path = write_temp("bins=50\nsteps=123\n");
    RunConfig cfg;
    load_config_file(cfg, path);
    apply_config_line(cfg, "bins=75", "--set");
    EXPECT_EQ(cfg.bins, 75);
    EXPECT_EQ(cfg.steps, 123);
    std::remove(path.c_str());
}

TEST(Config, OptimHyperMirrorsConfig) {
    RunConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.2;
    OptimHyper hy = optim_hyper(cfg);
    EXPECT_DOUBLE_EQ(hy.lr, 0.01);
    EXPECT_DOUBLE_EQ(hy.weight_decay, 0.2);
    EXPECT_DOUBLE_EQ(hy.beta1, cfg.beta1);
    EXPECT_DOUBLE_EQ(hy.eps, cfg.eps);
}

TEST(Config, ShippedPresetsLoad) {
    for (const char* rel : {"/configs/toy.cfg", "/configs/full.cfg"}) {
        const std::string path = std::string(MMTK_SOURCE_DIR) + rel;
        RunConfig cfg;
        EXPECT_NO_THROW(load_config_file(cfg, path)) << path;
        EXPECT_NO_THROW(validate_config(cfg)) << path;
    }
}
