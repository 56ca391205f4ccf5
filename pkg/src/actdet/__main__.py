from actdet.cli import main

main()
