// Smallest end-to-end training loop: two clips, a tiny model, a handful of
// steps.  Prints the loss trace and writes a checkpoint next to the binary.

#include <iostream>

#include <vdiff/vdiff.hpp>

int main() {
    using namespace vdiff;

    Corpus corpus;
    ClipSpec square;
    square.shape_kind = ShapeKind::kSquare;
    square.direction = MoveDirection::kRight;
    square.color = {1.0, 0.3, 0.3};
    corpus.push_back({square, 0});
    ClipSpec circle;
    circle.shape_kind = ShapeKind::kCircle;
    circle.direction = MoveDirection::kDown;
    circle.color = {0.3, 0.3, 1.0};
    corpus.push_back({circle, 1});

    UNetConfig ucfg;
    ucfg.base_channels = 16;
    ucfg.embed_dim = 64;
    ucfg.num_frames = 8;

    TrainConfig tcfg;
    tcfg.steps = 10;
    tcfg.batch_size = 2;
    tcfg.frames_per_clip = 8;
    tcfg.seed = 1;

    const auto sched = make_schedule<float>();
    ParamStore<float> store;
    VideoUNet<float> net(ucfg, store, tcfg.seed);
    std::cout << "parameters: " << store.total_parameters() << "\n";

    const auto result = train<float>(net, store, corpus, tcfg, sched,
                                     [](i64 step, float loss) {
                                         std::cout << "step " << step << " loss " << loss << "\n";
                                     });

    save_checkpoint("minimal_model.ckpt", store.state_dict(), "");
    std::cout << "saved minimal_model.ckpt after " << result.loss_trace.size() << " steps\n";
    return 0;
}
