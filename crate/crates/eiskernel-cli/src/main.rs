fn main() {
    println!("eiskernel");
}
