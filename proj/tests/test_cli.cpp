// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cslkit/tensor_io.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(CSLKIT_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(CSLKIT_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "cslkit_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("summary --format xml").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SingleConvSummary) {
  const CliRun r = run("summary -c " + config("single_conv.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "total analytic MACs: 2359296")) << r.out;
  EXPECT_TRUE(contains(r.out, "total params: 2304")) << r.out;
  const CliRun csv = run("summary --format csv -c " + config("single_conv.json"));
  EXPECT_EQ(csv.out, "layer,analytic_macs,empirical_macs,params\nconv,2359296,,2304\n");
}

TEST(Cli, MalformedConfigNamesTheKey) {
  const fs::path p = scratch() / "bad.json";
  write_file(p, R"({"fpn": {"width": 7}})");
  const CliRun r = run("summary -c " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.out, "fpn.width")) << r.out;
  write_file(p, "{\"input_size\": ");
  EXPECT_EQ(run("summary -c " + p.string()).code, 2);
}

TEST(Cli, DefaultSummaryIsDeterministicAndCalibrated) {
  const CliRun a = run("summary");
  const CliRun b = run("summary");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_TRUE(contains(a.out, "calibration:")) << a.out;
}

TEST(Cli, VerifyPassesAndDetectsInjectedFault) {
  const CliRun ok = run("verify -c " + config("toy.json") + " --trials 2");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_TRUE(contains(ok.out, "PASS")) << ok.out;
  const CliRun bad = run("verify -c " + config("toy.json") + " --fault-inject backbone.g0.m0.proj_pw");
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_TRUE(contains(bad.out, "backbone.g0.m0.proj_pw")) << bad.out;
}

TEST(Cli, AnchorsFromAnnotations) {
  const fs::path dir = scratch();
  write_file(dir / "empty.json", R"({"images": [{"id": 1, "width": 10, "height": 10}], "annotations": []})");
  EXPECT_EQ(run("anchors --annotations " + (dir / "empty.json").string() + " -o " + (dir / "a").string()).code, 1);
  write_file(dir / "broken.json", R"({"images": [], "annotations": [{"image_id": 4, "bbox": [0, 0, 1, 1]}]})");
  EXPECT_EQ(run("anchors --annotations " + (dir / "broken.json").string()).code, 2);

  std::string doc = R"({"images": [{"id": 1, "width": 100, "height": 100}], "annotations": [)";
  for (int i = 0; i < 30; ++i) {
    if (i) doc += ",";
    const int s = 10 + (i % 3) * 20 + i % 2;
    doc += R"({"image_id": 1, "bbox": [0, 0, )" + std::to_string(s) + ", " + std::to_string(s + 3) + "]}";
  }
  write_file(dir / "boxes.json", doc + "]}");
  const std::string args = "anchors --annotations " + (dir / "boxes.json").string() + " -o " + (dir / "a").string();
  const CliRun r = run(args);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "15 anchors")) << r.out;
  std::ifstream in(dir / "a.txt");
  const std::string first((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(run(args).code, 0);
  std::ifstream again(dir / "a.txt");
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(again)), {}), first);
}

TEST(Cli, DecodeZeroHeadOutputsIsEmpty) {
  const fs::path dir = scratch();
  std::string anchors;
  for (int l = 0; l < 5; ++l) anchors += "level " + std::to_string(l) + ": (0.1,0.1) (0.2,0.2) (0.3,0.3)\n";
  write_file(dir / "anchors.txt", anchors);
  csl::io::NamedTensors raw;
  const std::array<std::size_t, 5> sizes{8, 6, 4, 3, 2};
  for (std::size_t k = 0; k < 5; ++k) {
    raw.emplace_back("level" + std::to_string(k), csl::Tensor<float>(csl::Shape{1, 21, sizes[k], sizes[k]}));
  }
  csl::io::save_named((dir / "zeros.cslt").string(), raw);
  const std::string base = "decode -c " + config("toy.json") + " --raw " + (dir / "zeros.cslt").string() + " --anchors " + (dir / "anchors.txt").string();
  const CliRun r = run(base);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "[]")) << r.out;
  const CliRun low = run(base + " --thresh 0.2 --format table");
  EXPECT_EQ(low.code, 0) << low.out;
  EXPECT_TRUE(contains(low.out, "detections")) << low.out;
  EXPECT_EQ(run("decode --random --raw " + (dir / "zeros.cslt").string() + " --anchors " +
                (dir / "anchors.txt").string())
                .code,
            2);
}

TEST(Cli, DecodeRandomIsDeterministic) {
  const fs::path dir = scratch();
  std::string anchors;
  for (int l = 0; l < 5; ++l) anchors += "level " + std::to_string(l) + ": (0.1,0.1) (0.2,0.2) (0.3,0.3)\n";
  write_file(dir / "anchors.txt", anchors);
  const std::string args = "decode --random -c " + config("toy.json") + " --thresh 0.2 --seed 3 --anchors " +
                           (dir / "anchors.txt").string();
  const CliRun a = run(args);
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(run(args).out, a.out);
}

TEST(Cli, GradcheckFaultInjectionFails) {
  const CliRun bad = run("gradcheck --fault-inject");
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_TRUE(contains(bad.out, "FAIL")) << bad.out;
}

}  // namespace
