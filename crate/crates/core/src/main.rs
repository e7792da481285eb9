fn main() {
    std::process::exit(steklov_frac::run());
}
