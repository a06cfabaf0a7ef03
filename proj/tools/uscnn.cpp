// Command-line surface: train, infer, eval, gradcheck, colorize.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O error,
// 3 numerical failure. Machine-readable output (CSV, .flo, images) goes to
// the declared files or stdout; diagnostics go to stderr.

#include <cinttypes>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "uscnn/flow_io.hpp"
#include "uscnn/gradcheck.hpp"
#include "uscnn/inference.hpp"
#include "uscnn/metrics.hpp"
#include "uscnn/trainer.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

bool parse_crop(const std::string& text, int* h, int* w) {
    return std::sscanf(text.c_str(), "%dx%d", h, w) == 2 && *h > 0 && *w > 0;
}

void run_train(const std::string& data_dir, const std::string& out_path, uscnn::TrainConfig cfg,
               const std::string& crop_text) {
    if (!crop_text.empty() && !parse_crop(crop_text, &cfg.crop_height, &cfg.crop_width)) {
        throw uscnn::ShapeError("--crop expects HxW, got \"" + crop_text + "\"");
    }
    uscnn::validate_config(cfg);
    const uscnn::FramePairDataset data = uscnn::ingest_pairs(data_dir);
    std::fprintf(stderr, "ingested %zu pairs from %s (%d non-image files skipped)\n",
                 data.pairs.size(), data.root.string().c_str(), data.skipped_files);

    uscnn::EncoderDecoderNet net = uscnn::init_network(cfg.seed);
    std::printf("step,loss\n");
    uscnn::train(net, data, cfg, [](long step, double loss) {
        std::printf("%ld,%.9g\n", step, loss);
        std::fflush(stdout);
    });
    uscnn::save_checkpoint(net, out_path);
    std::fprintf(stderr, "checkpoint written to %s\n", out_path.c_str());
}

void run_infer(const std::string& ckpt, const std::string& f1_path, const std::string& f2_path,
               const std::string& out_path, const std::string& png_path,
               const uscnn::InferenceConfig& cfg) {
    const uscnn::EncoderDecoderNet net = uscnn::load_checkpoint(ckpt);
    const uscnn::Image frame1 = uscnn::read_image(f1_path);
    const uscnn::Image frame2 = uscnn::read_image(f2_path);
    const uscnn::FlowField flow = uscnn::estimate_flow(net, frame1, frame2, cfg);
    uscnn::write_flo(flow, out_path);
    if (!png_path.empty()) {
        uscnn::write_png(uscnn::flow_to_color(flow), png_path);
    }
}

void run_eval(const std::string& est_path, const std::string& gt_path) {
    const uscnn::FlowField est = uscnn::read_flo(est_path);
    const uscnn::FlowField gt = uscnn::read_flo(gt_path);
    const uscnn::FlowMetrics m = uscnn::compute_metrics(est, gt);
    std::printf("metric,value\n");
    std::printf("AEE-05,%.6f\n", m.aee_lt5);
    std::printf("AEE-5so,%.6f\n", m.aee_ge5);
    std::printf("AEE-tot,%.6f\n", m.aee_tot);
    std::printf("AAE-05,%.6f\n", m.aae_lt5);
    std::printf("AAE-5so,%.6f\n", m.aae_ge5);
    std::printf("AAE-tot,%.6f\n", m.aae_tot);
}

int run_gradcheck(std::uint32_t seed, double inject) {
    const double loss_err = uscnn::loss_gradient_max_rel_error(seed, 100, 16, 1e-3, inject);
    const double e2e_err = uscnn::end_to_end_max_rel_error(seed, inject);
    std::printf("check,max_rel_error,tolerance\n");
    std::printf("loss_gradient,%.3e,%.0e\n", loss_err, uscnn::kLossGradTolerance);
    std::printf("end_to_end,%.3e,%.0e\n", e2e_err, uscnn::kEndToEndTolerance);
    if (loss_err >= uscnn::kLossGradTolerance || e2e_err >= uscnn::kEndToEndTolerance) {
        std::fprintf(stderr, "gradient check failed tolerance\n");
        return kExitNumeric;
    }
    return 0;
}

void run_colorize(const std::string& flow_path, const std::string& out_path, double max_mag) {
    const uscnn::FlowField flow = uscnn::read_flo(flow_path);
    const uscnn::RgbImage rgb = uscnn::flow_to_color(flow, max_mag);
    const std::string ext = std::filesystem::path(out_path).extension().string();
    if (ext == ".ppm") {
        uscnn::write_ppm(rgb, out_path);
    } else {
        uscnn::write_png(rgb, out_path);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised optical-flow CNN: training, coarse-to-fine inference, evaluation"};
    app.require_subcommand(1);
    int exit_code = 0;

    // train
    auto* train_cmd = app.add_subcommand("train", "train on consecutive frame pairs");
    std::string data_dir, ckpt_out, crop_text;
    uscnn::TrainConfig train_cfg;
    train_cmd->add_option("--data", data_dir, "directory of frame sequences")->required();
    train_cmd->add_option("--out", ckpt_out, "output checkpoint path")->required();
    train_cmd->add_option("--lr", train_cfg.learning_rate, "ADAM learning rate");
    train_cmd->add_option("--batch", train_cfg.batch_size, "gradient-averaged batch size");
    train_cmd->add_option("--epochs", train_cfg.epochs, "passes over the dataset");
    train_cmd->add_option("--crop", crop_text, "training crop HxW (multiples of 16)");
    train_cmd->add_option("--seed", train_cfg.seed, "RNG seed");
    train_cmd->add_option("--eps", train_cfg.charbonnier_epsilon, "charbonnier epsilon");
    train_cmd->callback([&] { run_train(data_dir, ckpt_out, train_cfg, crop_text); });

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "estimate flow for a frame pair");
    std::string ckpt_in, frame1_path, frame2_path, flo_out, png_out;
    uscnn::InferenceConfig infer_cfg;
    infer_cmd->add_option("--ckpt", ckpt_in, "checkpoint path")->required();
    infer_cmd->add_option("--frame1", frame1_path, "reference frame")->required();
    infer_cmd->add_option("--frame2", frame2_path, "target frame")->required();
    infer_cmd->add_option("--out", flo_out, "output .flo path")->required();
    infer_cmd->add_option("--scales", infer_cfg.num_scales, "pyramid levels (default: auto)");
    infer_cmd->add_option("--iters", infer_cfg.iterations_per_scale, "iterations per level");
    infer_cmd->add_option("--png", png_out, "also write a color-coded PNG");
    infer_cmd->callback(
        [&] { run_infer(ckpt_in, frame1_path, frame2_path, flo_out, png_out, infer_cfg); });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "endpoint/angular error against ground truth");
    std::string est_path, gt_path;
    eval_cmd->add_option("--est", est_path, "estimated .flo")->required();
    eval_cmd->add_option("--gt", gt_path, "ground-truth .flo")->required();
    eval_cmd->callback([&] { run_eval(est_path, gt_path); });

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::uint32_t grad_seed = 0;
    double inject = 0.0;
    grad_cmd->add_option("--seed", grad_seed, "RNG seed");
    grad_cmd->add_option("--inject-gradient-error", inject)->group("");  // failure-path test hook
    grad_cmd->callback([&] { exit_code = run_gradcheck(grad_seed, inject); });

    // colorize
    auto* color_cmd = app.add_subcommand("colorize", "render a .flo file as a color-wheel image");
    std::string color_in, color_out;
    double max_mag = 0.0;
    color_cmd->add_option("--flow", color_in, "input .flo")->required();
    color_cmd->add_option("--out", color_out, "output .png or .ppm")->required();
    color_cmd->add_option("--max-mag", max_mag, "saturation normalization magnitude");
    color_cmd->callback([&] { run_colorize(color_in, color_out, max_mag); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    } catch (const uscnn::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const uscnn::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const uscnn::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return exit_code;
}
