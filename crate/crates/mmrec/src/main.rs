fn main() {
    println!("mmrec");
}
