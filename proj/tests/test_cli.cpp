#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "finn/cli.hpp"
#include "finn/model/checkpoint.hpp"

namespace fs = std::filesystem;
using finn::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result finn_cmd(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("finn_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& file, const std::string& text) {
    std::ofstream(file) << text;
}

std::string read_text(const std::string& file) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Keeps CLI training tests quick.
const std::vector<std::string> kTiny{"--train-paths", "20", "--val-paths", "4", "--quiet"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("price: anchor and degenerate branch") {
    const Result a = finn_cmd({"price", "--engine", "bs", "--spot", "110", "--strike", "100",
                               "--sigma", "0.125", "--rate", "0", "--ttm", "0.36"});
    CHECK(a.code == 0);
    CHECK(a.out.rfind("price=10.38", 0) == 0);
    CHECK(a.out.find("delta=0.90") != std::string::npos);
    const Result b = finn_cmd({"price", "--engine", "bs", "--spot", "100", "--strike", "100",
                               "--sigma", "1e-9", "--rate", "0", "--ttm", "0.5"});
    CHECK(b.code == 0);
    CHECK(b.out.rfind("price=0.000000", 0) == 0);
    const Result h = finn_cmd({"price", "--engine", "heston-cf", "--spot", "100", "--ttm", "0.36"});
    CHECK(h.code == 0);
    CHECK(h.out.rfind("price=", 0) == 0);
    CHECK(h.err.empty());
}

TEST_CASE("usage errors exit 2") {
    CHECK(finn_cmd({"price", "--no-such-flag"}).code == 2);
    CHECK(finn_cmd({}).code == 2);
    CHECK(finn_cmd({"price", "--engine", "black76"}).code == 2);
    CHECK(finn_cmd({"evaluate", "--model", "/nonexistent/model.ckpt"}).code == 2);
    CHECK(finn_cmd({"price", "--config", "/nonexistent/cfg.txt"}).code == 2);
    CHECK(finn_cmd({"train", "--epochs", "0"}).code == 2);
}

TEST_CASE("help annotates provenance") {
    const Result h = finn_cmd({"train", "--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("[paper]") != std::string::npos);
    CHECK(h.out.find("[artifact]") != std::string::npos);
    CHECK(h.out.find("[250]") != std::string::npos);
}

TEST_CASE("simulate") {
    const Result c = finn_cmd({"simulate", "--model", "gbm", "--sigma", "0", "--mu", "0", "--paths",
                               "1", "--steps", "5"});
    CHECK(c.code == 0);
    std::istringstream in(c.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "path_id,step,time,spot");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "100");
        ++rows;
    }
    CHECK(rows == 6);

    const std::vector<std::string> args{"simulate", "--model", "heston", "--paths", "4", "--steps", "10",
                                        "--seed", "3"};
    const Result a = finn_cmd(args), b = finn_cmd(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);

    const Result f = finn_cmd({"simulate", "--model", "heston", "--xi", "0.3", "--kappa", "1.25",
                               "--theta", "0.0225"});
    CHECK(f.code == 3);
    CHECK(f.out.empty());
    CHECK(f.err.find("0.05625") != std::string::npos);
    CHECK(f.err.find("0.09") != std::string::npos);
}

TEST_CASE("config precedence: flags > file > defaults") {
    TempDir tmp;
    const std::string cfg = tmp / "price.cfg";
    write_text(cfg, "# anchor\nspot=110\nsigma=0.125\nttm=0.36\n");
    const std::vector<std::string> base{"price", "--engine", "bs"};

    // defaults only: S = K = 100, sigma 0.125, ttm 0.24
    const Result d = finn_cmd(base);
    // file only
    const Result f = finn_cmd(cat(base, {"--config", cfg}));
    // file plus an overriding flag, on either side of --config
    const Result o1 = finn_cmd(cat(base, {"--config", cfg, "--spot", "100"}));
    const Result o2 = finn_cmd(cat(base, {"--spot", "100", "--config", cfg}));
    // flag only
    const Result g = finn_cmd(cat(base, {"--spot", "100", "--ttm", "0.36"}));

    CHECK(f.out.rfind("price=10.38", 0) == 0);
    CHECK(d.out != f.out);
    CHECK(o1.out == o2.out);
    CHECK(o1.out == g.out);
    CHECK(o1.out != f.out);
    for (const Result* r : {&d, &f, &o1, &o2, &g}) CHECK(r->code == 0);

    write_text(cfg, "spot=110\nnot-a-key=1\n");
    const Result w = finn_cmd(cat(base, {"--config", cfg}));
    CHECK(w.code == 0);
    CHECK(w.err.find("not-a-key") != std::string::npos);
}

TEST_CASE("train, evaluate, table") {
    TempDir tmp;
    const std::string runs = tmp / "runs";
    const Result t = finn_cmd(cat({"train", "--epochs", "1", "--runs", "2", "--out-dir", runs,
                                   "--tag", "t"},
                                  kTiny));
    REQUIRE(t.code == 0);
    const fs::path root = fs::path(runs) / "t";
    CHECK(fs::exists(root / "manifest.txt"));
    for (const char* s : {"seed0", "seed1"}) {
        CHECK(fs::exists(root / s / "model.ckpt"));
        CHECK(fs::exists(root / s / "config.snapshot"));
        CHECK(read_text((root / s / "history.csv").string())
                  .rfind("epoch,train_loss,val_loss,delta_clips,gamma_clips,seconds", 0) == 0);
    }
    const std::string ckpt = (root / "seed0" / "model.ckpt").string();
    CHECK(finn::load_checkpoint(ckpt).meta.process == "gbm");
    CHECK(t.out.find("seed=0 best_epoch=") != std::string::npos);

    // A second train into the same tag needs --overwrite.
    CHECK(finn_cmd(cat({"train", "--epochs", "1", "--out-dir", runs, "--tag", "t"}, kTiny)).code == 2);

    const std::vector<std::string> grid{"--spots", "11", "--ttms", "0.24,0.36"};
    const Result e = finn_cmd(cat({"evaluate", "--model", ckpt}, grid));
    CHECK(e.code == 0);
    CHECK(e.out.rfind("vol,ttm,price_mad,price_mad_std", 0) == 0);

    CHECK(finn_cmd(cat({"evaluate", "--model", ckpt, "--process", "heston"}, grid)).code == 5);
    CHECK(finn_cmd(cat({"evaluate", "--model", ckpt, "--kind", "put"}, grid)).code == 5);

    const Result tb = finn_cmd(cat({"table", "--run-dir", root.string()}, grid));
    CHECK(tb.code == 0);
    std::istringstream in(tb.out);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(row.rfind("0.125,0.24,", 0) == 0);
    CHECK(row.find("NA") == std::string::npos);

    const Result dg = finn_cmd(cat({"train", "--epochs", "1", "--hedge", "delta-gamma", "--atm-ttm",
                                    "0.12", "--out-dir", runs, "--tag", "dg"},
                                   kTiny));
    REQUIRE(dg.code == 0);
    const Result tdg = finn_cmd(cat({"table", "--run-dir", (fs::path(runs) / "dg").string()}, grid));
    CHECK(tdg.out.rfind("vol,hedge_ttm,ttm,", 0) == 0);
    CHECK(tdg.out.find("gamma_mad") != std::string::npos);
    CHECK(tdg.out.find("\n0.125,0.12,0.24,") != std::string::npos);
}

TEST_CASE("oracle as model gives an all-zero table") {
    const Result e = finn_cmd({"evaluate", "--model", "oracle", "--spots", "21", "--ttms", "0.24"});
    REQUIRE(e.code == 0);
    std::istringstream in(e.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::istringstream cells(line);
    std::string c;
    int i = 0;
    while (std::getline(cells, c, ',')) {
        if (i >= 2 && c != "NA") CHECK(std::stod(c) == 0.0);
        ++i;
    }
}

TEST_CASE("dry run enumerates the full sweep") {
    const Result d = finn_cmd({"table", "--dry-run", "--runs", "10"});
    CHECK(d.code == 0);
    CHECK(d.out.find("runs=10 cells=21 contracts=441 points_per_run=4410000 total_points=44100000") !=
          std::string::npos);
}

TEST_CASE("training abort exits 4") {
    TempDir tmp;
    const Result a = finn_cmd(cat({"train", "--epochs", "3", "--lr", "1e6", "--grad-clip", "1e30",
                                   "--out-dir", tmp / "runs"},
                                  kTiny));
    CHECK(a.code == 4);
    CHECK(a.err.find("aborted at epoch") != std::string::npos);
}
