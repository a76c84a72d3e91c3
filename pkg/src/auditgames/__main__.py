from auditgames.cli import main

main()
