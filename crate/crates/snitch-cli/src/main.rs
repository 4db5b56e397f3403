fn main() {
    eprintln!("benchmark runner not wired up yet");
    std::process::exit(2);
}
