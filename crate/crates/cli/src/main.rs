fn main() {
    eprintln!("command-line surface not wired up yet");
    std::process::exit(2);
}
