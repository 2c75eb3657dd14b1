from serpintent.cli import main

main()
