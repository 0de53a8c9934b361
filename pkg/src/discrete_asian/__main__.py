from discrete_asian.cli_reporting import main

raise SystemExit(main())
