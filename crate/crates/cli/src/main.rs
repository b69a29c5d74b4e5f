fn main() {
    println!("mobiman");
}
