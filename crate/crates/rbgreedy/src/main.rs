fn main() {
    rbgreedy::stream::assert_role_namespace();
    eprintln!("cli under construction");
}
