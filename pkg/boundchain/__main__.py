from boundchain.cli import main

raise SystemExit(main())
