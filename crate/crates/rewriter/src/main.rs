fn main() {
    rewriter::cli::run();
}
