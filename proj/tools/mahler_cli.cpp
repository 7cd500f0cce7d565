// mahler: volumes, Mahler products, enclosing ellipsoids, sandwich bounds,
// and the recursive bound-chain verifier, driven by JSON body specs.
//
// Reports embed the run configuration and print every number with 12
// significant digits; identical flags give byte-identical output no matter
// how many threads do the sampling. Exit code 0 means every check in the
// run passed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mahler/bodyspec.hpp"
#include "mahler/mahler.hpp"

namespace {

using namespace mahler;
using detail::fmt12;

struct RunConfig {
    long long samples = 200000;
    std::uint64_t seed = 0;
    std::string format = "json";
    std::string out;
    int threads = 1;
    bool force_mc = false;
};

// threads and the output path shape where and how fast the run happens, not
// what it computes, so they stay out of the echoed configuration
std::string config_json(const RunConfig& c) {
    return "{\"samples\": " + std::to_string(c.samples) + ", \"seed\": " + std::to_string(c.seed) +
           ", \"format\": \"" + c.format + "\", \"force_mc\": " + (c.force_mc ? "true" : "false") +
           "}";
}

std::string config_csv(const RunConfig& c) {
    return "# config samples=" + std::to_string(c.samples) + " seed=" + std::to_string(c.seed) +
           " format=" + c.format + " force_mc=" + (c.force_mc ? "1" : "0") + "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json parse_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

SymBody load_body(const std::string& path) {
    try {
        return body_from_spec(parse_json_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void emit(const RunConfig& cfg, const std::string& text) {
    if (cfg.out.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot write " + cfg.out);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string matrix_json(const num::Mat& m) {
    std::string s = "[";
    for (int i = 0; i < m.rows; ++i) {
        s += i ? ",[" : "[";
        for (int j = 0; j < m.cols; ++j) s += (j ? "," : "") + fmt12(m(i, j));
        s += "]";
    }
    return s + "]";
}

void check_row(std::string& c, const StepRecord& r) {
    c += "check," + r.name + "," + fmt12(r.lhs) + "," + fmt12(r.rhs) + "," + fmt12(r.ci) + "," +
         fmt12(r.tolerance) + "," + (r.pass ? "1" : "0") + "," + (r.exact ? "1" : "0") + "," +
         detail::csv_field(r.note) + "\n";
}

void check_json(std::string& j, const std::vector<StepRecord>& checks, bool pass) {
    j += "  \"checks\": [\n";
    for (std::size_t i = 0; i < checks.size(); ++i) {
        j += "    ";
        detail::record_json(j, checks[i]);
        j += (i + 1 < checks.size()) ? ",\n" : "\n";
    }
    j += "  ],\n  \"pass\": " + std::string(pass ? "true" : "false") + "\n}\n";
}

VolumeOptions volume_options(const RunConfig& cfg) {
    VolumeOptions vo;
    vo.samples = cfg.samples;
    vo.seed = cfg.seed;
    vo.threads = cfg.threads;
    vo.force_mc = cfg.force_mc;
    return vo;
}

int cmd_volume(const RunConfig& cfg, const std::string& spec_path) {
    SymBody k = load_body(spec_path);
    VolumeEstimate est = estimate_volume(k, volume_options(cfg));
    std::string outp;
    if (cfg.format == "json") {
        outp = "{\n  \"format\": \"mahler-volume-report\",\n  \"version\": 1,\n";
        outp += "  \"config\": " + config_json(cfg) + ",\n";
        outp += "  \"dim\": " + std::to_string(k.dim()) + ",\n";
        outp += "  \"estimate\": " + volume_estimate_json(est) + "\n}\n";
    } else {
        outp = "# mahler-volume-report v1\n" + config_csv(cfg) + "name,value\n";
        outp += "dim," + std::to_string(k.dim()) + "\n";
        outp += "value," + fmt12(est.value) + "\n";
        outp += "ci95," + fmt12(est.half_width_95) + "\n";
        outp += "method," + est.method + "\n";
        outp += "samples," + std::to_string(est.samples) + "\n";
        outp += "seed," + std::to_string(est.seed) + "\n";
    }
    emit(cfg, outp);
    return est.usable ? 0 : 1;
}

int cmd_mahler(const RunConfig& cfg, const std::string& spec_path) {
    SymBody k = load_body(spec_path);
    int n = k.dim();
    ProductEstimate pr = volume_product_ratio(k, volume_options(cfg));
    bool exact = pr.vol_body.method == "exact" && pr.vol_polar.method == "exact";

    auto cert = john_sandwich(k, 1000, 1e-7, rng::mix64(cfg.seed ^ 0x6a6f686eull));
    bool closed = cert.ratio >= 2.0;
    double bound = closed ? sandwich_bound(cert.ratio, n) : direct_bound(cert.ratio, n);

    std::vector<StepRecord> checks;
    StepRecord santalo;
    santalo.name = "santalo-upper";
    santalo.lhs = pr.value;
    santalo.rhs = 1.0;
    santalo.ci = 3.0 * pr.ci95;
    santalo.tolerance = 1e-9;
    santalo.exact = exact;
    santalo.pass = pr.usable && pr.value <= 1.0 + santalo.ci + santalo.tolerance;
    checks.push_back(santalo);

    StepRecord lower;
    lower.name = "sandwich-lower";
    lower.lhs = pr.value;
    lower.rhs = bound;
    lower.ci = 3.0 * pr.ci95;
    lower.tolerance = 1e-12;
    lower.exact = exact;
    lower.pass = pr.usable && pr.value >= bound - lower.ci - lower.tolerance;
    lower.note = closed ? "sandwich ratio " + fmt12(cert.ratio)
                        : "ratio " + fmt12(cert.ratio) + " below 2, direct bound";
    checks.push_back(lower);

    if (n >= 4) {
        StepRecord dimb;
        dimb.name = "dimension-lower";
        dimb.lhs = pr.value;
        dimb.rhs = dimension_bound(n);
        dimb.ci = 3.0 * pr.ci95;
        dimb.tolerance = 1e-12;
        dimb.exact = exact;
        dimb.pass = pr.usable && pr.value >= dimb.rhs - dimb.ci - dimb.tolerance;
        checks.push_back(dimb);
    }

    bool pass = true;
    for (const auto& r : checks) pass = pass && r.pass;

    std::string outp;
    if (cfg.format == "json") {
        outp = "{\n  \"format\": \"mahler-product-report\",\n  \"version\": 1,\n";
        outp += "  \"config\": " + config_json(cfg) + ",\n";
        outp += "  \"dim\": " + std::to_string(n) + ",\n";
        outp += "  \"product\": " + fmt12(pr.value) + ",\n";
        outp += "  \"product_ci95\": " + fmt12(pr.ci95) + ",\n";
        outp += "  \"product_exact\": " + std::string(exact ? "true" : "false") + ",\n";
        outp += "  \"volume\": " + volume_estimate_json(pr.vol_body) + ",\n";
        outp += "  \"polar_volume\": " + volume_estimate_json(pr.vol_polar) + ",\n";
        outp += "  \"sandwich_ratio\": " + fmt12(cert.ratio) + ",\n";
        outp += "  \"sandwich_bound\": " + fmt12(bound) + ",\n";
        outp += "  \"closed_form\": " + std::string(closed ? "true" : "false") + ",\n";
        outp += "  \"dimension_bound\": " + (n >= 4 ? fmt12(dimension_bound(n)) : "null") + ",\n";
        check_json(outp, checks, pass);
    } else {
        outp = "# mahler-product-report v1\n" + config_csv(cfg);
        outp += "section,name,lhs,rhs,ci,tolerance,pass,exact,note\n";
        auto meta = [&](const std::string& name, const std::string& value) {
            outp += "meta," + name + "," + value + ",,,,,,\n";
        };
        meta("dim", std::to_string(n));
        meta("product", fmt12(pr.value));
        meta("product_ci95", fmt12(pr.ci95));
        meta("product_exact", exact ? "1" : "0");
        meta("volume", fmt12(pr.vol_body.value));
        meta("polar_volume", fmt12(pr.vol_polar.value));
        meta("sandwich_ratio", fmt12(cert.ratio));
        meta("sandwich_bound", fmt12(bound));
        meta("closed_form", closed ? "1" : "0");
        if (n >= 4) meta("dimension_bound", fmt12(dimension_bound(n)));
        for (const auto& r : checks) check_row(outp, r);
        outp += "meta,pass," + std::string(pass ? "1" : "0") + ",,,,,,\n";
    }
    emit(cfg, outp);
    return pass ? 0 : 1;
}

const Ellipsoid& as_ellipsoid(const SymBody& b, const char* which) {
    if (b.kind() != BodyKind::ellipsoid)
        throw std::invalid_argument(std::string(which) +
                                    ": spec must be a plain ellipsoid (no operators)");
    return static_cast<const EllipsoidBody&>(b.node()).ell;
}

int cmd_verify_chain(const RunConfig& cfg, const std::string& spec_path, const std::string& e1_path,
                     const std::string& e2_path) {
    SymBody k = load_body(spec_path);
    ChainOptions co;
    co.samples = cfg.samples;
    co.seed = cfg.seed;
    co.threads = cfg.threads;

    std::optional<SandwichCertificate> cert;
    if (!e1_path.empty()) {
        Ellipsoid e1 = as_ellipsoid(load_body(e1_path), "--e1");
        Ellipsoid e2 = as_ellipsoid(load_body(e2_path), "--e2");
        cert = make_sandwich_certificate(k, std::move(e1), std::move(e2), co.check_dirs,
                                         co.inclusion_tol, detail::chain_seed(co.seed, 0, 0));
    }
    ChainReport rep = verify_chain(k, std::move(cert), co);
    emit(cfg, cfg.format == "json" ? chain_report_json(rep) : chain_report_csv(rep));
    return rep.pass ? 0 : 1;
}

int cmd_bound_table(const RunConfig& cfg, int n_min, int n_max, double c_bm) {
    if (n_min < 4) throw std::invalid_argument("bound-table: the dimension bound needs n >= 4");
    if (n_max < n_min) throw std::invalid_argument("bound-table: n_max < n_min");
    std::string outp;
    if (cfg.format == "json") {
        outp = "{\n  \"format\": \"mahler-bound-table\",\n  \"version\": 1,\n";
        outp += "  \"config\": " + config_json(cfg) + ",\n  \"rows\": [\n";
        for (int n = n_min; n <= n_max; ++n) {
            outp += "    {\"n\": " + std::to_string(n) +
                    ", \"dimension_bound\": " + fmt12(dimension_bound(n));
            if (c_bm > 0.0) outp += ", \"bm_bound\": " + fmt12(std::pow(c_bm, -n));
            outp += (n < n_max) ? "},\n" : "}\n";
        }
        outp += "  ]\n}\n";
    } else {
        outp = "# mahler-bound-table v1\n" + config_csv(cfg);
        outp += c_bm > 0.0 ? "n,dimension_bound,bm_bound\n" : "n,dimension_bound\n";
        for (int n = n_min; n <= n_max; ++n) {
            outp += std::to_string(n) + "," + fmt12(dimension_bound(n));
            if (c_bm > 0.0) outp += "," + fmt12(std::pow(c_bm, -n));
            outp += "\n";
        }
    }
    emit(cfg, outp);
    return 0;
}

int cmd_mvee(const RunConfig& cfg, const std::string& path) {
    nlohmann::json j = parse_json_file(path);
    std::string source;
    Ellipsoid ell = Ellipsoid(num::Mat::identity(1));
    int iterations = 0;
    bool converged = true;
    bool sampled = false;

    if (j.is_array()) {
        // a bare array is a point list, one representative per +- pair
        num::Mat pts;
        try {
            pts = detail::spec_matrix(j, "$");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path + ": " + e.what());
        }
        auto r = mvee_symmetric(pts);
        source = "points";
        ell = r.ellipsoid;
        iterations = r.iterations;
        converged = r.converged;
    } else {
        SymBody k = load_body(path);
        auto r = loewner(k);
        source = "body";
        ell = r.ellipsoid;
        sampled = r.sampled;
    }

    const num::Mat& m = ell.form();
    std::string outp;
    if (cfg.format == "json") {
        outp = "{\n  \"format\": \"mahler-mvee-report\",\n  \"version\": 1,\n";
        outp += "  \"config\": " + config_json(cfg) + ",\n";
        outp += "  \"source\": \"" + source + "\",\n";
        outp += "  \"dim\": " + std::to_string(ell.dim()) + ",\n";
        outp += "  \"matrix\": " + matrix_json(m) + ",\n";
        outp += "  \"iterations\": " + std::to_string(iterations) + ",\n";
        outp += "  \"sampled\": " + std::string(sampled ? "true" : "false") + ",\n";
        outp += "  \"converged\": " + std::string(converged ? "true" : "false") + "\n}\n";
    } else {
        outp = "# mahler-mvee-report v1\n" + config_csv(cfg) + "field,i,j,value\n";
        outp += "source,,," + source + "\n";
        outp += "dim,,," + std::to_string(ell.dim()) + "\n";
        outp += "iterations,,," + std::to_string(iterations) + "\n";
        outp += "sampled,,," + std::string(sampled ? "1" : "0") + "\n";
        outp += "converged,,," + std::string(converged ? "1" : "0") + "\n";
        for (int i = 0; i < m.rows; ++i)
            for (int jx = 0; jx < m.cols; ++jx)
                outp += "m," + std::to_string(i) + "," + std::to_string(jx) + "," +
                        fmt12(m(i, jx)) + "\n";
    }
    emit(cfg, outp);
    return converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"volumes, Mahler products, and sandwich-bound verification "
                 "for symmetric convex bodies"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    app.add_option("--samples", cfg.samples, "Monte Carlo samples per volume estimate")
        ->capture_default_str();
    app.add_option("--seed", cfg.seed, "base seed for all sampling")->capture_default_str();
    app.add_option("--format", cfg.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    app.add_option("--out", cfg.out, "write the report to this file instead of stdout");
    app.add_option("--threads", cfg.threads, "worker threads for sampling (does not affect output)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--force-mc", cfg.force_mc, "Monte Carlo even when an exact volume exists");

    std::string vol_spec, mah_spec, chain_spec, mvee_path, e1_path, e2_path;
    int n_min = 0, n_max = 0;
    double c_bm = 0.0;

    auto* vol = app.add_subcommand("volume", "estimate the volume of a body");
    vol->add_option("spec", vol_spec, "body spec JSON file")->required()->check(CLI::ExistingFile);

    auto* mah = app.add_subcommand(
        "mahler", "volume product s(K) with the Santalo and sandwich-bound checks");
    mah->add_option("spec", mah_spec, "body spec JSON file")->required()->check(CLI::ExistingFile);

    auto* chain = app.add_subcommand("verify-chain",
                                     "verify every step of the recursive lower-bound chain");
    chain->add_option("spec", chain_spec, "body spec JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* e1 = chain->add_option("--e1", e1_path, "inner ellipsoid spec (defaults to the John pair)")
                   ->check(CLI::ExistingFile);
    auto* e2 = chain->add_option("--e2", e2_path, "outer ellipsoid spec")->check(CLI::ExistingFile);
    e1->needs(e2);
    e2->needs(e1);

    auto* table = app.add_subcommand("bound-table", "dimension bound (log2 n)^-n per dimension");
    table->add_option("n_min", n_min, "first dimension (>= 4)")->required();
    table->add_option("n_max", n_max, "last dimension")->required();
    table->add_option("--c-bm", c_bm, "also tabulate C^-n for this constant");

    auto* mv = app.add_subcommand("mvee",
                                  "minimum-volume enclosing ellipsoid of a point list or body");
    mv->add_option("input", mvee_path, "JSON point array or body spec file")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*vol) return cmd_volume(cfg, vol_spec);
        if (*mah) return cmd_mahler(cfg, mah_spec);
        if (*chain) return cmd_verify_chain(cfg, chain_spec, e1_path, e2_path);
        if (*table) return cmd_bound_table(cfg, n_min, n_max, c_bm);
        if (*mv) return cmd_mvee(cfg, mvee_path);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        if (msg.find("envelope") != std::string::npos)
            std::cerr << "hint: the sampling envelope is an enclosing ellipsoid fitted from "
                         "sampled boundary points; for composites with numeric gauges it can "
                         "sit slightly inside the body. Wrap the body spec in a modest scale op or "
                         "estimate the polar side instead.\n";
        return 2;
    }
    return 0;
}
